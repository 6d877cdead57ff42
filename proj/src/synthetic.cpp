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

#include "reident/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "reident/error.hpp"
#include "reident/rng.hpp"

namespace reident {

namespace fs = std::filesystem;

std::string_view to_string(AnonymizationMode m) {
  return m == AnonymizationMode::kEdgePreserving ? "edge_preserving" : "edge_destroying";
}

AnonymizationMode parse_anonymization_mode(std::string_view s) {
  if (s == "edge_preserving") return AnonymizationMode::kEdgePreserving;
  if (s == "edge_destroying") return AnonymizationMode::kEdgeDestroying;
  throw PreconditionError("unknown anonymization mode: " + std::string(s));
}

void SyntheticConfig::validate() const {
  if (n_persons < 2) throw PreconditionError("synthetic data needs n_persons >= 2");
  if (images_per_person < 2) {
    throw PreconditionError("synthetic data needs images_per_person >= 2");
  }
  if (image_size < 32) throw PreconditionError("synthetic data needs image_size >= 32");
  if (n_persons > 9999 || images_per_person > 99) {
    throw PreconditionError("synthetic data supports at most 9999 persons x 99 images");
  }
  if (!(jitter >= 0.0) || jitter > 8.0) {
    throw PreconditionError("synthetic jitter must lie in [0, 8] pixels");
  }
  if (family_size < 1) throw PreconditionError("synthetic family_size must be at least 1");
  if (!preserving_conditioning.contains(Condition::kDepth) &&
      !preserving_conditioning.contains(Condition::kEdges)) {
    throw PreconditionError("edge-preserving conditioning must include depth or edges");
  }
}

namespace {

enum class ShapeKind { kDisk, kBar, kTriangle, kRing, kCross };
constexpr int kShapeKinds = 5;

struct Shape {
  ShapeKind kind;
  double cx, cy, r, angle;
};

// The silhouette is an ellipse shared by every person.
struct Silhouette {
  double cx, cy, rx, ry;
  bool contains(double x, double y) const {
    const double u = (x - cx) / rx, v = (y - cy) / ry;
    return u * u + v * v <= 1.0;
  }
};

Silhouette silhouette(int size) {
  return {size / 2.0, size / 2.0, 0.42 * size, 0.46 * size};
}

Shape random_shape(Rng& rng, int size) {
  const Silhouette sil = silhouette(size);
  Shape s;
  s.kind = static_cast<ShapeKind>(rng.below(kShapeKinds));
  s.r = rng.uniform(0.07, 0.17) * size;
  s.angle = rng.uniform(0.0, M_PI);
  // Keep the shape's bounding circle inside the silhouette.
  do {
    s.cx = rng.uniform(0.2 * size, 0.8 * size);
    s.cy = rng.uniform(0.18 * size, 0.82 * size);
  } while (std::pow((s.cx - sil.cx) / (sil.rx - s.r), 2) +
               std::pow((s.cy - sil.cy) / (sil.ry - s.r), 2) > 1.0);
  return s;
}

std::vector<Shape> random_layout(Rng& rng, int size) {
  const int n = 3 + static_cast<int>(rng.below(3));
  std::vector<Shape> shapes;
  for (int i = 0; i < n; ++i) shapes.push_back(random_shape(rng, size));
  return shapes;
}

// A family member redraws one shape of the family template and shifts the
// others slightly.
std::vector<Shape> family_member_layout(const std::vector<Shape>& family, Rng& rng, int size) {
  std::vector<Shape> out = family;
  const std::size_t redrawn = rng.below(out.size());
  const double shift = 1.5 * size / 64.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i == redrawn) {
      out[i] = random_shape(rng, size);
    } else {
      out[i].cx += rng.uniform(-shift, shift);
      out[i].cy += rng.uniform(-shift, shift);
    }
  }
  return out;
}

std::vector<Shape> jitter(const std::vector<Shape>& layout, Rng& rng, int size,
                          double pixels) {
  const double amount = pixels * size / 64.0;
  std::vector<Shape> out = layout;
  for (auto& s : out) {
    s.cx += rng.uniform(-amount, amount);
    s.cy += rng.uniform(-amount, amount);
    s.r *= rng.uniform(0.95, 1.05);
  }
  return out;
}

bool covers(const Shape& s, double x, double y) {
  const double dx = x - s.cx, dy = y - s.cy;
  const double ca = std::cos(s.angle), sa = std::sin(s.angle);
  const double u = ca * dx + sa * dy, v = -sa * dx + ca * dy;
  switch (s.kind) {
    case ShapeKind::kDisk:
      return dx * dx + dy * dy <= s.r * s.r;
    case ShapeKind::kBar:
      return std::abs(u) <= 0.9 * s.r && std::abs(v) <= 0.6 * s.r;
    case ShapeKind::kRing: {
      const double d2 = dx * dx + dy * dy;
      return d2 <= s.r * s.r && d2 >= 0.25 * s.r * s.r;
    }
    case ShapeKind::kCross:
      return (std::abs(u) <= s.r && std::abs(v) <= 0.3 * s.r) ||
             (std::abs(v) <= s.r && std::abs(u) <= 0.3 * s.r);
    case ShapeKind::kTriangle: {
      double px[3], py[3];
      for (int k = 0; k < 3; ++k) {
        const double a = s.angle + k * 2.0 * M_PI / 3.0;
        px[k] = s.cx + s.r * std::cos(a);
        py[k] = s.cy + s.r * std::sin(a);
      }
      for (int k = 0; k < 3; ++k) {
        const int j = (k + 1) % 3;
        if ((px[j] - px[k]) * (y - py[k]) - (py[j] - py[k]) * (x - px[k]) < 0) return false;
      }
      return true;
    }
  }
  return false;
}

// Intensity at least 0.35 away from `ref`, so region boundaries stay visible.
double contrasting(Rng& rng, double ref) {
  constexpr double kMinContrast = 0.35;
  while (true) {
    const double v = rng.uniform();
    if (std::abs(v - ref) >= kMinContrast) return v;
  }
}

Image render(const std::vector<Shape>& shapes, Rng& rng, int size, bool textured) {
  const Silhouette sil = silhouette(size);
  const double background = rng.uniform();
  const double body = contrasting(rng, background);
  std::vector<double> fills;
  for (std::size_t i = 0; i < shapes.size(); ++i) fills.push_back(contrasting(rng, body));
  double freq = 0.0, phase = 0.0;
  if (textured) {
    freq = rng.uniform(0.2, 0.8) * 64.0 / size;
    phase = rng.uniform(0.0, 2.0 * M_PI);
  }
  Image img(size, size, 1);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double fx = x + 0.5, fy = y + 0.5;
      double v = background;
      if (sil.contains(fx, fy)) {
        v = body;
        for (std::size_t i = 0; i < shapes.size(); ++i) {
          if (covers(shapes[i], fx, fy)) v = fills[i];
        }
      }
      if (textured) v += 0.04 * std::sin(freq * x + phase) * std::cos(freq * y);
      v += 0.01 * rng.normal();
      img.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return img;
}

}  // namespace

std::vector<SyntheticImage> render_synthetic_dataset(const SyntheticConfig& cfg) {
  cfg.validate();
  const bool preserving = cfg.anonymization_mode == AnonymizationMode::kEdgePreserving;
  const ConditioningSet conditioning =
      preserving ? cfg.preserving_conditioning : ConditioningSet{Condition::kSegmentation};
  // Filename token understood by the default NamingRule.
  std::string aug_token = "aug";
  if (conditioning != NamingRule{}.default_conditioning) {
    aug_token += '-';
    if (conditioning.contains(Condition::kDepth)) aug_token += 'd';
    if (conditioning.contains(Condition::kEdges)) aug_token += 'e';
    if (conditioning.contains(Condition::kSegmentation)) aug_token += 's';
  }
  std::vector<SyntheticImage> out;
  out.reserve(static_cast<std::size_t>(cfg.n_persons) * cfg.images_per_person * 2);
  for (int p = 0; p < cfg.n_persons; ++p) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(p)));
    const std::string person = fmt::format("p{:04d}", p);
    std::vector<Shape> layout;
    if (cfg.family_size <= 1) {
      layout = random_layout(rng, cfg.image_size);
    } else {
      Rng family_rng(derive_seed(cfg.seed, "family/" + std::to_string(p / cfg.family_size)));
      layout = family_member_layout(random_layout(family_rng, cfg.image_size), rng,
                                    cfg.image_size);
    }
    for (int i = 0; i < cfg.images_per_person; ++i) {
      const auto geometry = jitter(layout, rng, cfg.image_size, cfg.jitter);
      SyntheticImage orig;
      orig.record.image_id = fmt::format("{}_{:02d}", person, i);
      orig.record.person_id = person;
      orig.record.variant = Variant::kOriginal;
      orig.record.path = fs::path("images") / (orig.record.image_id + ".png");
      orig.pixels = render(geometry, rng, cfg.image_size, false);

      SyntheticImage anon;
      anon.record.image_id = orig.record.image_id + "_" + aug_token;
      anon.record.person_id = person;
      anon.record.variant = Variant::kAugmented;
      anon.record.base_image_id = orig.record.image_id;
      anon.record.conditioning = conditioning;
      anon.record.path = fs::path("images") / (anon.record.image_id + ".png");
      // A separate stream keeps the originals independent of the mode.
      Rng anon_rng(derive_seed(cfg.seed, "anonymized/" + orig.record.image_id));
      const auto anon_geometry =
          preserving ? geometry : random_layout(anon_rng, cfg.image_size);
      anon.pixels = render(anon_geometry, anon_rng, cfg.image_size, true);

      out.push_back(std::move(orig));
      out.push_back(std::move(anon));
    }
  }
  return out;
}

Manifest generate_synthetic_dataset(const SyntheticConfig& cfg, const fs::path& out_dir) {
  auto images = render_synthetic_dataset(cfg);
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());
  Manifest m;
  m.seed = cfg.seed;
  for (auto& img : images) {
    img.record.path = fs::absolute(out_dir / img.record.path).lexically_normal();
    save_png(img.record.path, quantize_8bit(img.pixels));
    m.records.push_back(std::move(img.record));
  }
  write_manifest(out_dir / "manifest.jsonl", m);
  return m;
}

}  // namespace reident
