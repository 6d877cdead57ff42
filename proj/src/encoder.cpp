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

#include "reident/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "reident/error.hpp"

namespace reident {

std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::kTinyConv: return "tiny_conv";
    case Architecture::kResnet50Class: return "resnet50_class";
    case Architecture::kConvnextTinyClass: return "convnext_tiny_class";
    case Architecture::kVitClass: return "vit_class";
  }
  return "?";
}

Architecture parse_architecture(std::string_view s) {
  for (Architecture a : {Architecture::kTinyConv, Architecture::kResnet50Class,
                         Architecture::kConvnextTinyClass, Architecture::kVitClass}) {
    if (to_string(a) == s) return a;
  }
  throw PreconditionError("unknown encoder architecture: " + std::string(s));
}

void EncoderSpec::validate() const {
  if (feature_dim <= 0) throw PreconditionError("feature_dim must be positive");
  if (input_resolution < 16) throw PreconditionError("input resolution must be at least 16");
  if (input_channels != 1 && input_channels != 3) {
    throw PreconditionError("encoder input must have 1 or 3 channels");
  }
  if (architecture == Architecture::kTinyConv && feature_dim % 8 != 0) {
    throw PreconditionError("tiny_conv needs feature_dim divisible by 8");
  }
}

void ProjectionSpec::validate() const {
  if (hidden_dim <= 0 || output_dim <= 0) {
    throw PreconditionError("projection dimensions must be positive");
  }
}

namespace {

void uniform_fill(Rng& rng, float bound, float* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = static_cast<float>(rng.uniform(-bound, bound));
  }
}

void relu_inplace(std::vector<float>& v) {
  for (float& x : v) x = std::max(x, 0.0f);
}

void relu_backward(std::vector<float>& grad, const std::vector<float>& out) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (out[i] <= 0.0f) grad[i] = 0.0f;
  }
}

}  // namespace

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad)
    : weight(out_channels, in_channels * kernel * kernel),
      bias(out_channels),
      grad_weight(FloatMatrix::Zero(out_channels, in_channels * kernel * kernel)),
      grad_bias(Eigen::VectorXf::Zero(out_channels)),
      in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride),
      pad_(pad) {
  weight.setZero();
  bias.setZero();
}

void Conv2d::init(Rng& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in_ * kernel_ * kernel_));
  uniform_fill(rng, bound, weight.data(), weight.size());
  uniform_fill(rng, bound, bias.data(), bias.size());
}

Activation Conv2d::forward(const Activation& x, bool keep_cache) {
  if (x.c != in_) {
    throw PreconditionError("conv expects " + std::to_string(in_) +
                            " input channels, got " + std::to_string(x.c));
  }
  const int ho = output_size(x.h), wo = output_size(x.w);
  const Eigen::Index plane = static_cast<Eigen::Index>(x.n) * ho * wo;
  FloatMatrix cols(in_ * kernel_ * kernel_, plane);
  for (int ci = 0; ci < in_; ++ci) {
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        float* row = cols.row((ci * kernel_ + ky) * kernel_ + kx).data();
        for (int ni = 0; ni < x.n; ++ni) {
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ + ky - pad_;
            float* dst = row + (static_cast<std::size_t>(ni) * ho + oy) * wo;
            if (iy < 0 || iy >= x.h) {
              std::fill(dst, dst + wo, 0.0f);
              continue;
            }
            const float* src = &x.data[((static_cast<std::size_t>(ci) * x.n + ni) * x.h + iy) * x.w];
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ + kx - pad_;
              dst[ox] = (ix < 0 || ix >= x.w) ? 0.0f : src[ix];
            }
          }
        }
      }
    }
  }
  Activation y(x.n, out_, ho, wo);
  Eigen::Map<FloatMatrix> ym(y.data.data(), out_, plane);
  ym.noalias() = weight * cols;
  ym.colwise() += bias;
  if (keep_cache) {
    cols_ = std::move(cols);
    cached_n_ = x.n;
    cached_h_ = x.h;
    cached_w_ = x.w;
  }
  return y;
}

Activation Conv2d::backward(const Activation& grad_out) {
  const int ho = grad_out.h, wo = grad_out.w;
  const Eigen::Index plane = static_cast<Eigen::Index>(grad_out.n) * ho * wo;
  if (cols_.cols() != plane) throw PreconditionError("conv backward without forward cache");
  Eigen::Map<const FloatMatrix> gy(grad_out.data.data(), out_, plane);
  grad_weight.noalias() += gy * cols_.transpose();
  grad_bias += gy.rowwise().sum();
  const FloatMatrix gcols = weight.transpose() * gy;

  Activation gx(cached_n_, in_, cached_h_, cached_w_);
  for (int ci = 0; ci < in_; ++ci) {
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        const float* row = gcols.row((ci * kernel_ + ky) * kernel_ + kx).data();
        for (int ni = 0; ni < gx.n; ++ni) {
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ + ky - pad_;
            if (iy < 0 || iy >= gx.h) continue;
            const float* src = row + (static_cast<std::size_t>(ni) * ho + oy) * wo;
            float* dst = &gx.data[((static_cast<std::size_t>(ci) * gx.n + ni) * gx.h + iy) * gx.w];
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ + kx - pad_;
              if (ix >= 0 && ix < gx.w) dst[ix] += src[ox];
            }
          }
        }
      }
    }
  }
  return gx;
}

Linear::Linear(int in, int out)
    : weight(FloatMatrix::Zero(out, in)),
      bias(Eigen::VectorXf::Zero(out)),
      grad_weight(FloatMatrix::Zero(out, in)),
      grad_bias(Eigen::VectorXf::Zero(out)) {}

void Linear::init(Rng& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(weight.cols()));
  uniform_fill(rng, bound, weight.data(), weight.size());
  uniform_fill(rng, bound, bias.data(), bias.size());
}

FloatMatrix Linear::forward(const FloatMatrix& x, bool keep_cache) {
  if (x.cols() != weight.cols()) {
    throw PreconditionError("linear layer expects dimension " +
                            std::to_string(weight.cols()) + ", got " +
                            std::to_string(x.cols()));
  }
  FloatMatrix y = x * weight.transpose();
  y.rowwise() += bias.transpose();
  if (keep_cache) input_ = x;
  return y;
}

FloatMatrix Linear::backward(const FloatMatrix& grad_out) {
  grad_weight.noalias() += grad_out.transpose() * input_;
  grad_bias += grad_out.colwise().sum().transpose();
  return grad_out * weight;
}

TinyConvEncoder::TinyConvEncoder(const EncoderSpec& spec) : spec_(spec) {
  spec.validate();
  if (spec.architecture != Architecture::kTinyConv) {
    throw PreconditionError(std::string(to_string(spec.architecture)) +
                            " needs an external backbone adapter, which this build does not include");
  }
  if (spec.pretrained) {
    throw PreconditionError("tiny_conv has no pretrained weights; set pretrained=false");
  }
  const int f = spec.feature_dim;
  int in = spec.input_channels;
  for (int width : {f / 8, f / 4, f / 2, f}) {
    blocks_.emplace_back(in, width, 3, 2, 1);
    in = width;
  }
}

void TinyConvEncoder::init(Rng& rng) {
  for (auto& b : blocks_) b.init(rng);
}

FloatMatrix TinyConvEncoder::forward(const Activation& images, bool keep_cache) {
  if (images.c != spec_.input_channels || images.h != spec_.input_resolution ||
      images.w != spec_.input_resolution) {
    throw PreconditionError(
        "encoder expects " + std::to_string(spec_.input_channels) + "x" +
        std::to_string(spec_.input_resolution) + "x" +
        std::to_string(spec_.input_resolution) + " inputs, got " +
        std::to_string(images.c) + "x" + std::to_string(images.h) + "x" +
        std::to_string(images.w));
  }
  outputs_.clear();
  Activation x = blocks_[0].forward(images, keep_cache);
  relu_inplace(x.data);
  for (std::size_t i = 1; i < blocks_.size(); ++i) {
    Activation y = blocks_[i].forward(x, keep_cache);
    relu_inplace(y.data);
    if (keep_cache) outputs_.push_back(std::move(x));
    x = std::move(y);
  }
  const int hw = x.h * x.w;
  FloatMatrix features(x.n, x.c);
  for (int ci = 0; ci < x.c; ++ci) {
    for (int ni = 0; ni < x.n; ++ni) {
      const float* p = &x.data[(static_cast<std::size_t>(ci) * x.n + ni) * hw];
      double s = 0.0;
      for (int i = 0; i < hw; ++i) s += p[i];
      features(ni, ci) = static_cast<float>(s / hw);
    }
  }
  if (keep_cache) outputs_.push_back(std::move(x));
  return features;
}

void TinyConvEncoder::backward(const FloatMatrix& grad_features) {
  if (outputs_.size() != blocks_.size()) {
    throw PreconditionError("encoder backward without forward cache");
  }
  const Activation& last = outputs_.back();
  Activation g(last.n, last.c, last.h, last.w);
  const int hw = last.h * last.w;
  for (int ci = 0; ci < last.c; ++ci) {
    for (int ni = 0; ni < last.n; ++ni) {
      const float v = grad_features(ni, ci) / static_cast<float>(hw);
      float* p = &g.data[(static_cast<std::size_t>(ci) * last.n + ni) * hw];
      std::fill(p, p + hw, v);
    }
  }
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    relu_backward(g.data, outputs_[i].data);
    Activation gx = blocks_[i].backward(g);
    if (i == 0) break;
    g = std::move(gx);
  }
  outputs_.clear();
}

void TinyConvEncoder::zero_grad() {
  for (auto& b : blocks_) {
    b.grad_weight.setZero();
    b.grad_bias.setZero();
  }
}

std::vector<ParamView> TinyConvEncoder::parameters(const std::string& prefix) {
  std::vector<ParamView> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto& b = blocks_[i];
    const std::string name = prefix + "block" + std::to_string(i);
    out.push_back({name + ".weight", {b.out_channels(), b.in_channels(), 3, 3},
                   b.weight.data(), b.grad_weight.data(),
                   static_cast<std::size_t>(b.weight.size())});
    out.push_back({name + ".bias", {b.out_channels()}, b.bias.data(),
                   b.grad_bias.data(), static_cast<std::size_t>(b.bias.size())});
  }
  return out;
}

ProjectionHead::ProjectionHead(int feature_dim, const ProjectionSpec& spec)
    : feature_dim_(feature_dim),
      spec_(spec),
      first_(feature_dim, spec.hidden_dim),
      second_(spec.hidden_dim, spec.output_dim) {
  spec.validate();
}

void ProjectionHead::init(Rng& rng) {
  first_.init(rng);
  second_.init(rng);
}

FloatMatrix ProjectionHead::forward(const FloatMatrix& features, bool keep_cache) {
  if (features.cols() != feature_dim_) {
    throw PreconditionError("projection head expects features of dimension " +
                            std::to_string(feature_dim_) + ", got " +
                            std::to_string(features.cols()));
  }
  FloatMatrix h = first_.forward(features, keep_cache).cwiseMax(0.0f);
  FloatMatrix z = second_.forward(h, keep_cache);
  if (keep_cache) hidden_ = std::move(h);
  return z;
}

FloatMatrix ProjectionHead::backward(const FloatMatrix& grad_out) {
  FloatMatrix gh = second_.backward(grad_out);
  gh = (hidden_.array() > 0.0f).select(gh, 0.0f);
  return first_.backward(gh);
}

void ProjectionHead::zero_grad() {
  for (Linear* l : {&first_, &second_}) {
    l->grad_weight.setZero();
    l->grad_bias.setZero();
  }
}

std::vector<ParamView> ProjectionHead::parameters(const std::string& prefix) {
  std::vector<ParamView> out;
  int i = 0;
  for (Linear* l : {&first_, &second_}) {
    const std::string name = prefix + "fc" + std::to_string(i++);
    out.push_back({name + ".weight",
                   {static_cast<int>(l->weight.rows()), static_cast<int>(l->weight.cols())},
                   l->weight.data(), l->grad_weight.data(),
                   static_cast<std::size_t>(l->weight.size())});
    out.push_back({name + ".bias", {static_cast<int>(l->bias.size())},
                   l->bias.data(), l->grad_bias.data(),
                   static_cast<std::size_t>(l->bias.size())});
  }
  return out;
}

Model::Model(const EncoderSpec& encoder, const ProjectionSpec& projection)
    : channel_mean(encoder.input_channels, 0.0f),
      channel_std(encoder.input_channels, 1.0f),
      encoder_(encoder),
      head_(encoder.feature_dim, projection) {}

void Model::init(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "model_init"));
  encoder_.init(rng);
  head_.init(rng);
}

FloatMatrix Model::encode(const Activation& images) {
  return encoder_.forward(images, false);
}

FloatMatrix Model::project(const FloatMatrix& features) {
  return head_.forward(features, false);
}

FloatMatrix Model::forward_train(const Activation& images) {
  return head_.forward(encoder_.forward(images, true), true);
}

void Model::backward(const FloatMatrix& grad_embeddings) {
  encoder_.backward(head_.backward(grad_embeddings));
}

void Model::zero_grad() {
  encoder_.zero_grad();
  head_.zero_grad();
}

std::vector<ParamView> Model::parameters() {
  auto out = encoder_.parameters("encoder.");
  auto head = head_.parameters("head.");
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

Image prepare_image(const Image& img, const EncoderSpec& spec) {
  Image x = img;
  if (spec.input_channels == 1 && x.channels() != 1) {
    x = to_grayscale(x);
  } else if (spec.input_channels == 3 && x.channels() == 1) {
    Image rgb(x.width(), x.height(), 3);
    for (int y = 0; y < x.height(); ++y) {
      for (int xx = 0; xx < x.width(); ++xx) {
        for (int c = 0; c < 3; ++c) rgb.at(xx, y, c) = x.at(xx, y);
      }
    }
    x = std::move(rgb);
  }
  return resize(x, spec.input_resolution, spec.input_resolution);
}

Activation make_input_batch(std::span<const Image> images, const Model& model) {
  const EncoderSpec& spec = model.encoder_spec();
  const int res = spec.input_resolution, ch = spec.input_channels;
  Activation batch(static_cast<int>(images.size()), ch, res, res);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = images[n];
    if (img.width() != res || img.height() != res || img.channels() != ch) {
      throw PreconditionError("image " + std::to_string(n) + " is " +
                              std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                              "x" + std::to_string(img.channels()) +
                              ", encoder expects " + std::to_string(res) + "x" +
                              std::to_string(res) + "x" + std::to_string(ch));
    }
    for (int c = 0; c < ch; ++c) {
      const float mean = model.channel_mean[c];
      const float inv = 1.0f / model.channel_std[c];
      for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
          batch.at(c, static_cast<int>(n), y, x) = (img.at(x, y, c) - mean) * inv;
        }
      }
    }
  }
  return batch;
}

FloatMatrix encode(Model& model, const Activation& images) {
  return model.encode(images);
}

FloatMatrix project(Model& model, const FloatMatrix& features) {
  return model.project(features);
}

AdamW::AdamW(std::vector<ParamView> params, Options options)
    : params_(std::move(params)), opt_(options) {
  if (opt_.learning_rate < 0) throw PreconditionError("learning rate must be non-negative");
  for (const auto& p : params_) {
    m_.emplace_back(p.size, 0.0f);
    v_.emplace_back(p.size, 0.0f);
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  const float lr = static_cast<float>(opt_.learning_rate);
  const float decay = static_cast<float>(opt_.learning_rate * opt_.weight_decay);
  const float b1 = static_cast<float>(opt_.beta1);
  const float b2 = static_cast<float>(opt_.beta2);
  const float step_size = static_cast<float>(opt_.learning_rate / bc1);
  const float sqrt_bc2 = static_cast<float>(std::sqrt(bc2));
  const float eps = static_cast<float>(opt_.eps);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ParamView& p = params_[i];
    float* m = m_[i].data();
    float* v = v_[i].data();
    for (std::size_t j = 0; j < p.size; ++j) {
      const float g = p.grad[j];
      p.value[j] -= decay * p.value[j];
      m[j] = b1 * m[j] + (1.0f - b1) * g;
      v[j] = b2 * v[j] + (1.0f - b2) * g * g;
      if (lr != 0.0f) {
        p.value[j] -= step_size * m[j] / (std::sqrt(v[j]) / sqrt_bc2 + eps);
      }
    }
  }
}

}  // namespace reident
