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

#ifndef REIDENT_EDGEOPS_HPP_
#define REIDENT_EDGEOPS_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reident/dataset.hpp"
#include "reident/image.hpp"

namespace reident {

enum class EdgeDetector { kCanny, kHed, kFallbackGradient };

std::string_view to_string(EdgeDetector d);

struct EdgeImage {
  Image pixels;  // single channel, values in [0,1]
  EdgeDetector detector = EdgeDetector::kCanny;
  std::string source_image_id;
  bool converted_from_color = false;
};

enum class BlurOrder { kBlurFirst, kBlurAfter };

struct CannyParams {
  // Hysteresis thresholds on the 8-bit gradient scale (L1 Sobel magnitude).
  double low = 100.0;
  double high = 200.0;
  BlurOrder order = BlurOrder::kBlurFirst;
};

// 5x5 Gaussian blur followed by Canny. Color input is converted with luma
// weights. With kBlurFirst the output is binary; kBlurAfter blurs the binary
// edge map and so returns soft values.
EdgeImage canny_edges(const Image& img, const CannyParams& params = {},
                      std::string source_image_id = {});

// 8-bit building blocks of canny_edges.
struct GrayU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;
};

GrayU8 to_gray_u8(const Image& single_channel);
// Gaussian 5x5 with sigma 0.3*((5-1)*0.5-1)+0.8 and reflect-101 borders.
GrayU8 gaussian_blur_5x5(const GrayU8& img);
// Edge pixels are 255, everything else 0.
GrayU8 canny_u8(const GrayU8& img, double low, double high);

// Learned soft edge detector. Without weights it runs in fallback mode:
// Sobel gradient magnitude normalized to [0,1].
class EdgeModel {
 public:
  // Environment variable naming a directory with deploy.prototxt and
  // hed_pretrained_bsds.caffemodel.
  static constexpr const char* kWeightsEnv = "REIDENT_HED_WEIGHTS";

  static EdgeModel fallback();
  // Loads HED weights; throws IoError naming the offending file.
  static EdgeModel load(const std::filesystem::path& dir);
  // Uses kWeightsEnv when set, else the fallback. `warning` receives a note
  // when falling back.
  static EdgeModel from_environment(std::string* warning = nullptr);

  bool is_fallback() const { return net_ == nullptr; }
  EdgeImage run(const Image& img, std::string source_image_id = {}) const;

 private:
  struct Net;
  std::shared_ptr<const Net> net_;
};

EdgeImage learned_edges(const Image& img, const EdgeModel& model,
                        std::string source_image_id = {});

// Normalized Sobel gradient magnitude, the fallback learned-edge output.
Image gradient_magnitude(const Image& gray);

// SSIM with an 11x11 Gaussian window (sigma 1.5), C1=(0.01L)^2,
// C2=(0.03L)^2, L=1, averaged over all fully contained windows. Channels are
// averaged.
double ssim(const Image& a, const Image& b);

double mean_l1(const Image& a, const Image& b);

struct EdgeSimilarityRow {
  ConditioningSet conditioning;
  double ssim = 0.0;
  double l1 = 0.0;
  std::size_t n_pairs = 0;
};

struct EdgePairGroup {
  ConditioningSet conditioning;
  std::vector<std::pair<Image, Image>> pairs;  // (original, anonymized)
};

// Chooses the edge operator applied to both images of a pair.
struct EdgeExtractor {
  EdgeDetector detector = EdgeDetector::kCanny;
  CannyParams canny;
  EdgeModel model = EdgeModel::fallback();

  EdgeImage operator()(const Image& img, std::string source_image_id = {}) const;
};

// Mean SSIM and mean L1 between edge maps of each original/anonymized pair,
// one row per non-empty group. Empty groups are skipped with a warning.
std::vector<EdgeSimilarityRow> edge_similarity_report(
    const std::vector<EdgePairGroup>& groups, const EdgeExtractor& extractor,
    std::vector<std::string>* warnings = nullptr);

// Edge transform of every original and augmented record in `m`, written as
// out_dir/<image_id>_edge.png. Derived records keep person, split and
// conditioning; an edge_augmented record's base is the edge image of its
// base. The returned manifest holds the input records followed by the new
// ones.
struct EdgeDatasetResult {
  Manifest manifest;
  std::size_t n_edge_original = 0;
  std::size_t n_edge_augmented = 0;
};

EdgeDatasetResult derive_edge_dataset(const Manifest& m, const EdgeExtractor& extractor,
                                      const std::filesystem::path& out_dir,
                                      std::string_view edge_marker = "edge");

void write_edge_similarity_csv(const std::filesystem::path& file,
                               const std::vector<EdgeSimilarityRow>& rows);

}  // namespace reident

#endif  // REIDENT_EDGEOPS_HPP_
