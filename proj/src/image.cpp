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

#include "reident/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "reident/error.hpp"

namespace reident {

namespace {

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(
      std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

cv::Mat to_mat_f32(const Image& img) {
  cv::Mat m(img.height(), img.width(), CV_32FC(img.channels()));
  std::copy(img.pixels().begin(), img.pixels().end(), m.ptr<float>());
  return m;
}

Image from_mat_f32(const cv::Mat& m) {
  Image img(m.cols, m.rows, m.channels());
  cv::Mat cont = m.isContinuous() ? m : m.clone();
  const float* p = cont.ptr<float>();
  std::copy(p, p + img.size(), img.pixels().begin());
  return img;
}

}  // namespace

Image::Image(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0 || channels < 1 || channels > 4) {
    throw PreconditionError("invalid image shape");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Image to_grayscale(const Image& img) {
  if (img.channels() == 1) return img;
  if (img.channels() < 3) {
    throw PreconditionError("cannot convert a " +
                            std::to_string(img.channels()) +
                            "-channel image to grayscale");
  }
  Image out(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.at(x, y) = 0.299f * img.at(x, y, 0) + 0.587f * img.at(x, y, 1) +
                     0.114f * img.at(x, y, 2);
    }
  }
  return out;
}

Image resize(const Image& img, int width, int height) {
  if (width <= 0 || height <= 0) {
    throw PreconditionError("resize target must be positive");
  }
  if (img.width() == width && img.height() == height) return img;
  const bool shrink = width < img.width() && height < img.height();
  cv::Mat out;
  cv::resize(to_mat_f32(img), out, cv::Size(width, height), 0, 0,
             shrink ? cv::INTER_AREA : cv::INTER_LINEAR);
  return from_mat_f32(out);
}

Image load_png(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) {
    throw IoError("cannot read image: " + path.string());
  }
  if (raw.channels() == 4) {
    cv::cvtColor(raw, raw, cv::COLOR_BGRA2BGR);
  }
  if (raw.channels() == 3) {
    cv::cvtColor(raw, raw, cv::COLOR_BGR2RGB);
  }
  const double scale = raw.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
  cv::Mat f;
  raw.convertTo(f, CV_32F, scale);
  return from_mat_f32(f);
}

void save_png(const std::filesystem::path& path, const Image& img) {
  if (img.empty()) throw PreconditionError("cannot save an empty image");
  if (img.channels() != 1 && img.channels() != 3) {
    throw PreconditionError("PNG output supports 1 or 3 channels");
  }
  cv::Mat m(img.height(), img.width(), CV_8UC(img.channels()));
  std::transform(img.pixels().begin(), img.pixels().end(), m.ptr<std::uint8_t>(),
                 to_byte);
  if (img.channels() == 3) cv::cvtColor(m, m, cv::COLOR_RGB2BGR);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw IoError("cannot write image: " + path.string());
}

Image quantize_8bit(const Image& img) {
  Image out = img;
  for (float& v : out.pixels()) v = to_byte(v) / 255.0f;
  return out;
}

}  // namespace reident
