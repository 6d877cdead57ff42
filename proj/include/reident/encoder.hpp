/*
 * Copyright 2026 The reident Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef REIDENT_ENCODER_HPP_
#define REIDENT_ENCODER_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "reident/image.hpp"
#include "reident/rng.hpp"

namespace reident {

using FloatMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Architecture {
  kTinyConv,
  kResnet50Class,
  kConvnextTinyClass,
  kVitClass,
};

std::string_view to_string(Architecture a);
Architecture parse_architecture(std::string_view s);

struct EncoderSpec {
  Architecture architecture = Architecture::kTinyConv;
  int feature_dim = 256;
  bool pretrained = false;
  int input_resolution = 128;
  int input_channels = 1;

  void validate() const;
};

struct ProjectionSpec {
  int hidden_dim = 256;
  int output_dim = 128;

  void validate() const;
};

// Images in channel-major batch layout: data[c][n][y][x].
struct Activation {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<float> data;

  Activation() = default;
  Activation(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0f) {}

  float& at(int ci, int ni, int y, int x) {
    return data[((static_cast<std::size_t>(ci) * n + ni) * h + y) * w + x];
  }
  float at(int ci, int ni, int y, int x) const {
    return data[((static_cast<std::size_t>(ci) * n + ni) * h + y) * w + x];
  }
};

// Mutable view of one parameter tensor and its gradient buffer.
struct ParamView {
  std::string name;
  std::vector<int> shape;
  float* value;
  float* grad;
  std::size_t size;
};

// 2-D convolution with square kernels and zero padding.
class Conv2d {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad);

  void init(Rng& rng);
  Activation forward(const Activation& x, bool keep_cache);
  // Accumulates parameter gradients; returns the gradient for the input.
  Activation backward(const Activation& grad_out);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int output_size(int input) const { return (input + 2 * pad_ - kernel_) / stride_ + 1; }

  FloatMatrix weight;  // [out, in * k * k]
  Eigen::VectorXf bias;
  FloatMatrix grad_weight;
  Eigen::VectorXf grad_bias;

 private:
  int in_, out_, kernel_, stride_, pad_;
  FloatMatrix cols_;
  int cached_n_ = 0, cached_h_ = 0, cached_w_ = 0;
};

class Linear {
 public:
  Linear(int in, int out);

  void init(Rng& rng);
  FloatMatrix forward(const FloatMatrix& x, bool keep_cache);
  FloatMatrix backward(const FloatMatrix& grad_out);

  FloatMatrix weight;  // [out, in]
  Eigen::VectorXf bias;
  FloatMatrix grad_weight;
  Eigen::VectorXf grad_bias;

 private:
  FloatMatrix input_;
};

// Backbone: four stride-2 3x3 convolution blocks with ReLU, then global
// average pooling. Channel widths are feature_dim/8, /4, /2 and feature_dim.
class TinyConvEncoder {
 public:
  explicit TinyConvEncoder(const EncoderSpec& spec);

  void init(Rng& rng);
  // Returns [batch, feature_dim].
  FloatMatrix forward(const Activation& images, bool keep_cache);
  void backward(const FloatMatrix& grad_features);
  void zero_grad();
  std::vector<ParamView> parameters(const std::string& prefix);

  const EncoderSpec& spec() const { return spec_; }

 private:
  EncoderSpec spec_;
  std::vector<Conv2d> blocks_;
  std::vector<Activation> outputs_;  // post-ReLU outputs, kept for backward
};

// Two affine layers with a ReLU between them.
class ProjectionHead {
 public:
  ProjectionHead(int feature_dim, const ProjectionSpec& spec);

  void init(Rng& rng);
  FloatMatrix forward(const FloatMatrix& features, bool keep_cache);
  FloatMatrix backward(const FloatMatrix& grad_out);
  void zero_grad();
  std::vector<ParamView> parameters(const std::string& prefix);

  const ProjectionSpec& spec() const { return spec_; }
  int feature_dim() const { return feature_dim_; }
  Linear& first() { return first_; }
  Linear& second() { return second_; }

 private:
  int feature_dim_;
  ProjectionSpec spec_;
  Linear first_;
  Linear second_;
  FloatMatrix hidden_;
};

// Backbone plus projection head, with the input normalization statistics
// learned from the training split.
class Model {
 public:
  Model(const EncoderSpec& encoder, const ProjectionSpec& projection);

  void init(std::uint64_t seed);

  // Inference. `images` must already be normalized.
  FloatMatrix encode(const Activation& images);
  FloatMatrix project(const FloatMatrix& features);

  // Training pass over a batch; backward must follow with dL/dz.
  FloatMatrix forward_train(const Activation& images);
  void backward(const FloatMatrix& grad_embeddings);
  void zero_grad();

  std::vector<ParamView> parameters();

  const EncoderSpec& encoder_spec() const { return encoder_.spec(); }
  const ProjectionSpec& projection_spec() const { return head_.spec(); }

  std::vector<float> channel_mean;
  std::vector<float> channel_std;

 private:
  TinyConvEncoder encoder_;
  ProjectionHead head_;
};

// Converts to the encoder's channel count and resizes to its resolution.
Image prepare_image(const Image& img, const EncoderSpec& spec);

// Stacks prepared images into a batch normalized with the model's
// per-channel statistics.
Activation make_input_batch(std::span<const Image> images, const Model& model);

// Functional forms of the backbone and head passes.
FloatMatrix encode(Model& model, const Activation& images);
FloatMatrix project(Model& model, const FloatMatrix& features);

class AdamW {
 public:
  struct Options {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
  };

  AdamW(std::vector<ParamView> params, Options options);
  void step();
  long steps() const { return t_; }

 private:
  std::vector<ParamView> params_;
  Options opt_;
  std::vector<std::vector<float>> m_, v_;
  long t_ = 0;
};

}  // namespace reident

#endif  // REIDENT_ENCODER_HPP_
