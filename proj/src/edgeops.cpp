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

#include "reident/edgeops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <unordered_set>

#include <opencv2/dnn.hpp>
#include <opencv2/imgproc.hpp>

#include "reident/error.hpp"

namespace reident {

namespace fs = std::filesystem;

std::string_view to_string(EdgeDetector d) {
  switch (d) {
    case EdgeDetector::kCanny: return "canny";
    case EdgeDetector::kHed: return "hed";
    case EdgeDetector::kFallbackGradient: return "fallback_gradient";
  }
  return "?";
}

namespace {

int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

std::array<double, 5> gaussian_kernel_5() {
  const double sigma = 0.3 * ((5 - 1) * 0.5 - 1) + 0.8;
  std::array<double, 5> k{};
  double sum = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double d = i - 2;
    k[i] = std::exp(-d * d / (2 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable 5x5 Gaussian on doubles with reflect-101 borders.
std::vector<double> blur_5x5(const std::vector<double>& src, int w, int h) {
  static const auto k = gaussian_kernel_5();
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * src[y * w + reflect101(x + i, w)];
      tmp[y * w + x] = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * tmp[reflect101(y + i, h) * w + x];
      out[y * w + x] = s;
    }
  }
  return out;
}

void require_nonempty(const Image& img) {
  if (img.empty() || img.width() == 0 || img.height() == 0) {
    throw PreconditionError("edge detection on an empty image");
  }
}

}  // namespace

GrayU8 to_gray_u8(const Image& single_channel) {
  if (single_channel.channels() != 1) {
    throw PreconditionError("expected a single-channel image");
  }
  GrayU8 out{single_channel.width(), single_channel.height(), {}};
  out.data.reserve(single_channel.size());
  for (float v : single_channel.pixels()) {
    out.data.push_back(static_cast<std::uint8_t>(
        std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  }
  return out;
}

GrayU8 gaussian_blur_5x5(const GrayU8& img) {
  std::vector<double> src(img.data.begin(), img.data.end());
  const auto blurred = blur_5x5(src, img.width, img.height);
  GrayU8 out{img.width, img.height, std::vector<std::uint8_t>(blurred.size())};
  for (std::size_t i = 0; i < blurred.size(); ++i) {
    out.data[i] = static_cast<std::uint8_t>(
        std::clamp<long>(std::lround(blurred[i]), 0, 255));
  }
  return out;
}

GrayU8 canny_u8(const GrayU8& img, double low_thresh, double high_thresh) {
  if (!(low_thresh > 0) || high_thresh < low_thresh) {
    throw PreconditionError("Canny thresholds need high >= low > 0");
  }
  const int w = img.width, h = img.height;
  if (w == 0 || h == 0) throw PreconditionError("edge detection on an empty image");
  const int low = static_cast<int>(std::floor(low_thresh));
  const int high = static_cast<int>(std::floor(high_thresh));
  auto px = [&](int x, int y) {
    return static_cast<int>(img.data[clampi(y, 0, h - 1) * w + clampi(x, 0, w - 1)]);
  };

  // Gradient buffers padded by one zero pixel on every side.
  const int pw = w + 2;
  std::vector<int> dx(static_cast<std::size_t>(w) * h), dy(dx.size());
  std::vector<int> mag(static_cast<std::size_t>(pw) * (h + 2), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                     (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const int gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                     (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      dx[y * w + x] = gx;
      dy[y * w + x] = gy;
      mag[(y + 1) * pw + x + 1] = std::abs(gx) + std::abs(gy);
    }
  }

  // 0: not an edge, 1: weak candidate, 2: strong edge.
  constexpr int kShift = 15;
  const int tg22 = static_cast<int>(0.4142135623730950488 * (1 << kShift) + 0.5);
  std::vector<std::uint8_t> state(static_cast<std::size_t>(w) * h, 0);
  std::vector<int> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int* m = &mag[(y + 1) * pw + x + 1];
      const int v = *m;
      if (v <= low) continue;
      const int xs = dx[y * w + x], ys = dy[y * w + x];
      const int ax = std::abs(xs);
      const int ay = std::abs(ys) << kShift;
      const int tg22x = ax * tg22;
      const int tg67x = tg22x + (ax << (kShift + 1));
      bool peak;
      if (ay < tg22x) {
        peak = v > m[-1] && v >= m[1];
      } else if (ay > tg67x) {
        peak = v > m[-pw] && v >= m[pw];
      } else {
        const int s = (xs ^ ys) < 0 ? -1 : 1;
        peak = v > m[-pw - s] && v > m[pw + s];
      }
      if (!peak) continue;
      if (v > high) {
        state[y * w + x] = 2;
        stack.push_back(y * w + x);
      } else {
        state[y * w + x] = 1;
      }
    }
  }
  while (!stack.empty()) {
    const int idx = stack.back();
    stack.pop_back();
    const int y = idx / w, x = idx % w;
    for (int oy = -1; oy <= 1; ++oy) {
      for (int ox = -1; ox <= 1; ++ox) {
        const int ny = y + oy, nx = x + ox;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        std::uint8_t& s = state[ny * w + nx];
        if (s == 1) {
          s = 2;
          stack.push_back(ny * w + nx);
        }
      }
    }
  }
  GrayU8 out{w, h, std::vector<std::uint8_t>(state.size(), 0)};
  for (std::size_t i = 0; i < state.size(); ++i) out.data[i] = state[i] == 2 ? 255 : 0;
  return out;
}

EdgeImage canny_edges(const Image& img, const CannyParams& params,
                      std::string source_image_id) {
  require_nonempty(img);
  EdgeImage out;
  out.detector = EdgeDetector::kCanny;
  out.source_image_id = std::move(source_image_id);
  out.converted_from_color = img.channels() != 1;
  const GrayU8 gray = to_gray_u8(to_grayscale(img));
  const bool blur_first = params.order == BlurOrder::kBlurFirst;
  const GrayU8 edges =
      canny_u8(blur_first ? gaussian_blur_5x5(gray) : gray, params.low, params.high);
  out.pixels = Image(gray.width, gray.height, 1);
  auto dst = out.pixels.pixels();
  if (blur_first) {
    for (std::size_t i = 0; i < edges.data.size(); ++i) dst[i] = edges.data[i] ? 1.0f : 0.0f;
  } else {
    std::vector<double> bin(edges.data.size());
    for (std::size_t i = 0; i < bin.size(); ++i) bin[i] = edges.data[i] ? 1.0 : 0.0;
    const auto soft = blur_5x5(bin, gray.width, gray.height);
    for (std::size_t i = 0; i < soft.size(); ++i) {
      dst[i] = static_cast<float>(std::clamp(soft[i], 0.0, 1.0));
    }
  }
  return out;
}

Image gradient_magnitude(const Image& gray) {
  require_nonempty(gray);
  const Image g = to_grayscale(gray);
  const int w = g.width(), h = g.height();
  auto px = [&](int x, int y) {
    return static_cast<double>(g.at(clampi(x, 0, w - 1), clampi(y, 0, h - 1)));
  };
  const double norm = 4.0 * std::sqrt(2.0);
  Image out(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const double gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      out.at(x, y) = static_cast<float>(std::min(1.0, std::hypot(gx, gy) / norm));
    }
  }
  return out;
}

struct EdgeModel::Net {
  mutable std::mutex mu;
  mutable cv::dnn::Net net;
};

EdgeModel EdgeModel::fallback() { return EdgeModel{}; }

EdgeModel EdgeModel::load(const fs::path& dir) {
  const fs::path proto = dir / "deploy.prototxt";
  const fs::path weights = dir / "hed_pretrained_bsds.caffemodel";
  for (const auto& f : {proto, weights}) {
    if (!fs::is_regular_file(f)) throw IoError("missing edge model file: " + f.string());
  }
  auto net = std::make_shared<Net>();
  try {
    net->net = cv::dnn::readNetFromCaffe(proto.string(), weights.string());
  } catch (const cv::Exception& e) {
    throw IoError("corrupt edge model weights in " + weights.string() + " (" +
                  proto.filename().string() + "): " + e.what());
  }
  if (net->net.empty()) {
    throw IoError("corrupt edge model weights: " + weights.string());
  }
  EdgeModel m;
  m.net_ = std::move(net);
  return m;
}

EdgeModel EdgeModel::from_environment(std::string* warning) {
  const char* dir = std::getenv(kWeightsEnv);
  if (dir == nullptr || *dir == '\0') {
    if (warning) {
      *warning = std::string(kWeightsEnv) +
                 " is not set; learned edges fall back to normalized Sobel gradient magnitude";
    }
    return fallback();
  }
  return load(dir);
}

EdgeImage EdgeModel::run(const Image& img, std::string source_image_id) const {
  require_nonempty(img);
  EdgeImage out;
  out.source_image_id = std::move(source_image_id);
  out.converted_from_color = img.channels() != 1 && is_fallback();
  if (is_fallback()) {
    out.detector = EdgeDetector::kFallbackGradient;
    out.pixels = gradient_magnitude(to_grayscale(img));
    return out;
  }
  out.detector = EdgeDetector::kHed;
  cv::Mat bgr(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = img.channels() == 1 ? img.at(x, y) : img.at(x, y, 2 - c);
        bgr.at<cv::Vec3b>(y, x)[c] =
            static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
      }
    }
  }
  const cv::Mat blob = cv::dnn::blobFromImage(
      bgr, 1.0, cv::Size(img.width(), img.height()),
      cv::Scalar(104.00698793, 116.66876762, 122.67891434), false, false);
  cv::Mat result;
  {
    std::lock_guard lock(net_->mu);
    net_->net.setInput(blob);
    result = net_->net.forward();
  }
  cv::Mat map(result.size[2], result.size[3], CV_32F, result.ptr<float>());
  cv::Mat resized;
  cv::resize(map, resized, cv::Size(img.width(), img.height()));
  out.pixels = Image(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.pixels.at(x, y) = std::clamp(resized.at<float>(y, x), 0.0f, 1.0f);
    }
  }
  return out;
}

EdgeImage learned_edges(const Image& img, const EdgeModel& model,
                        std::string source_image_id) {
  return model.run(img, std::move(source_image_id));
}

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw PreconditionError(std::string(what) + " of images with different shapes");
  }
  if (a.empty()) throw PreconditionError(std::string(what) + " of empty images");
}

// Valid-mode separable filtering of one channel.
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h,
                                 const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * src[y * w + x + i];
      tmp[y * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "SSIM");
  constexpr int kWindow = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  const int w = a.width(), h = a.height();
  if (w < kWindow || h < kWindow) {
    throw PreconditionError("SSIM needs images of at least 11x11 pixels");
  }
  std::vector<double> k(kWindow);
  double ksum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    k[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    ksum += k[i];
  }
  for (double& v : k) v /= ksum;

  double total = 0.0;
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  for (int c = 0; c < a.channels(); ++c) {
    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      x[i] = a.pixels()[i * a.channels() + c];
      y[i] = b.pixels()[i * b.channels() + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, w, h, k), my = filter_valid(y, w, h, k);
    const auto sxx = filter_valid(xx, w, h, k), syy = filter_valid(yy, w, h, k);
    const auto sxy = filter_valid(xy, w, h, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double va = sxx[i] - mx[i] * mx[i];
      const double vb = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      sum += ((2 * mx[i] * my[i] + kC1) * (2 * cov + kC2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (va + vb + kC2));
    }
    total += sum / static_cast<double>(mx.size());
  }
  return std::clamp(total / a.channels(), -1.0, 1.0);
}

double mean_l1(const Image& a, const Image& b) {
  require_same_shape(a, b, "mean L1");
  double s = 0.0;
  const auto pa = a.pixels(), pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    s += std::abs(static_cast<double>(pa[i]) - static_cast<double>(pb[i]));
  }
  return s / static_cast<double>(pa.size());
}

EdgeImage EdgeExtractor::operator()(const Image& img, std::string source_image_id) const {
  if (detector == EdgeDetector::kCanny) {
    return canny_edges(img, canny, std::move(source_image_id));
  }
  return model.run(img, std::move(source_image_id));
}

std::vector<EdgeSimilarityRow> edge_similarity_report(
    const std::vector<EdgePairGroup>& groups, const EdgeExtractor& extractor,
    std::vector<std::string>* warnings) {
  std::vector<EdgeSimilarityRow> rows;
  for (const auto& g : groups) {
    if (g.pairs.empty()) {
      if (warnings) {
        warnings->push_back("conditioning group " + g.conditioning.label() +
                            " has no pairs; skipped");
      }
      continue;
    }
    EdgeSimilarityRow row;
    row.conditioning = g.conditioning;
    for (const auto& [orig, anon] : g.pairs) {
      const Image eo = extractor(orig).pixels;
      const Image ea = extractor(anon).pixels;
      row.ssim += ssim(eo, ea);
      row.l1 += mean_l1(eo, ea);
    }
    row.n_pairs = g.pairs.size();
    row.ssim /= static_cast<double>(row.n_pairs);
    row.l1 /= static_cast<double>(row.n_pairs);
    rows.push_back(row);
  }
  return rows;
}

void write_edge_similarity_csv(const fs::path& file,
                               const std::vector<EdgeSimilarityRow>& rows) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << "conditioning,ssim,l1,n_pairs\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%zu", r.ssim, r.l1, r.n_pairs);
    out << r.conditioning.label() << ',' << buf << '\n';
  }
  if (!out) throw IoError("write failed: " + file.string());
}

EdgeDatasetResult derive_edge_dataset(const Manifest& m, const EdgeExtractor& extractor,
                                      const fs::path& out_dir, std::string_view edge_marker) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  const std::string suffix = "_" + std::string(edge_marker);
  EdgeDatasetResult out;
  out.manifest = m;
  std::unordered_set<std::string> ids;
  for (const auto& r : m.records) ids.insert(r.image_id);
  for (const auto& r : m.records) {
    if (r.variant != Variant::kOriginal && r.variant != Variant::kAugmented) continue;
    ImageRecord e = r;
    e.image_id = r.image_id + suffix;
    if (!ids.insert(e.image_id).second) {
      throw PreconditionError("manifest already holds " + e.image_id);
    }
    if (r.variant == Variant::kOriginal) {
      e.variant = Variant::kEdgeOriginal;
      ++out.n_edge_original;
    } else {
      e.variant = Variant::kEdgeAugmented;
      if (r.base_image_id) e.base_image_id = *r.base_image_id + suffix;
      ++out.n_edge_augmented;
    }
    e.path = out_dir / (e.image_id + ".png");
    save_png(e.path, extractor(load_png(r.path), r.image_id).pixels);
    out.manifest.records.push_back(std::move(e));
  }
  return out;
}

}  // namespace reident
