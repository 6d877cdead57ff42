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

#ifndef REIDENT_IMAGE_HPP_
#define REIDENT_IMAGE_HPP_

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace reident {

// Interleaved row-major image with intensities in [0,1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  float& at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<float> pixels() { return data_; }
  std::span<const float> pixels() const { return data_; }

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

// Luma conversion with weights (0.299, 0.587, 0.114). Single-channel input is
// returned unchanged.
Image to_grayscale(const Image& img);

// Bilinear resize with pixel-area averaging when shrinking.
Image resize(const Image& img, int width, int height);

// 8-bit grayscale or RGB PNG. Stored intensity is round(255 * value).
Image load_png(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const Image& img);

// Quantizes to the 8-bit grid without touching disk.
Image quantize_8bit(const Image& img);

}  // namespace reident

#endif  // REIDENT_IMAGE_HPP_
