#include "srrn/scenes.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "srrn/error.hpp"
#include "srrn/image_io.hpp"
#include "srrn/random.hpp"

namespace srrn {
namespace {

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double hh = std::fmod(h, 1.0) * 6.0;
  const int sector = static_cast<int>(hh);
  const double f = hh - sector;
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

// Smooth random field in [-1, 1] built from a few Gaussian bumps.
struct BumpField {
  struct Bump {
    double cy, cx, radius, weight;
  };
  std::vector<Bump> bumps;

  BumpField(Rng& rng, int size, int count) {
    for (int i = 0; i < count; ++i) {
      bumps.push_back({rng.uniform(0, size), rng.uniform(0, size), rng.uniform(0.15, 0.5) * size,
                       rng.uniform(-1.0, 1.0)});
    }
  }

  double at(double y, double x) const {
    double v = 0.0;
    for (const Bump& b : bumps) {
      const double d2 = (y - b.cy) * (y - b.cy) + (x - b.cx) * (x - b.cx);
      v += b.weight * std::exp(-d2 / (2 * b.radius * b.radius));
    }
    return std::clamp(v, -1.0, 1.0);
  }
};

}  // namespace

std::array<double, 3> class_color(int label, int class_count) {
  if (label <= 0) return {0.45, 0.45, 0.45};
  const double value = (label % 2 == 0) ? 0.95 : 0.7;
  return hsv_to_rgb(static_cast<double>(label - 1) / std::max(1, class_count - 1), 0.85, value);
}

LabeledImage make_background_scene(const SceneOptions& options, std::size_t index) {
  if (options.size < 8) fail(ErrorCode::invalid_argument, "scene size must be >= 8");
  if (options.class_count < 2) fail(ErrorCode::invalid_argument, "scenes need at least two classes");
  Rng rng(derive_seed(options.seed, {0xb6u, index}));
  const int n = options.size;
  Planes img(3, n, n);
  SemanticMap label(n, n, 0);

  const BumpField shade(rng, n, 3);
  const auto base = class_color(0);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double s = 0.15 * shade.at(y, x);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = base[static_cast<std::size_t>(c)] + s;
    }
  }

  const int objects = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, options.max_objects))));
  for (int o = 0; o < objects; ++o) {
    const int cls = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(options.class_count - 1)));
    const auto color = class_color(cls, options.class_count);
    const double brightness = rng.uniform(0.9, 1.1);
    const double cy = rng.uniform(0.15, 0.85) * n, cx = rng.uniform(0.15, 0.85) * n;
    const double ry = rng.uniform(0.12, 0.3) * n, rx = rng.uniform(0.12, 0.3) * n;
    const bool ellipse = rng.uniform() < 0.5;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const double dy = (y + 0.5 - cy) / ry, dx = (x + 0.5 - cx) / rx;
        const bool inside = ellipse ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (!inside) continue;
        label.set(y, x, static_cast<std::uint8_t>(cls), options.class_count);
        // Gentle shading keeps the class color recognizable.
        const double s = 1.0 + 0.05 * shade.at(x, y);
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = color[static_cast<std::size_t>(c)] * brightness * s;
      }
    }
  }
  return {fmt::format("bg_{:05d}", index), ImageTensor(std::move(img)), std::move(label)};
}

SourceImage make_reflection_scene(const SceneOptions& options, std::size_t index) {
  if (options.size < 8) fail(ErrorCode::invalid_argument, "scene size must be >= 8");
  Rng rng(derive_seed(options.seed, {0x7ef1u, index}));
  const int n = options.size;
  Planes img(3, n, n);
  std::array<BumpField, 3> fields{BumpField(rng, n, 4), BumpField(rng, n, 4), BumpField(rng, n, 4)};
  std::array<double, 3> base{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        img.at(c, y, x) = base[static_cast<std::size_t>(c)] + 0.35 * fields[static_cast<std::size_t>(c)].at(y, x);
      }
    }
  }
  // A couple of soft-edged blobs in arbitrary colors.
  const int blobs = 1 + static_cast<int>(rng.below(3));
  for (int b = 0; b < blobs; ++b) {
    const std::array<double, 3> color{rng.uniform(), rng.uniform(), rng.uniform()};
    const double cy = rng.uniform(0, n), cx = rng.uniform(0, n), r = rng.uniform(0.1, 0.3) * n;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const double d = std::hypot(y + 0.5 - cy, x + 0.5 - cx);
        const double w = std::clamp((r - d) / 2.0 + 0.5, 0.0, 1.0);
        for (int c = 0; c < 3; ++c) {
          double& v = img.at(c, y, x);
          v = (1 - w) * v + w * color[static_cast<std::size_t>(c)];
        }
      }
    }
  }
  return {fmt::format("rf_{:05d}", index), ImageTensor(std::move(img))};
}

std::vector<LabeledImage> make_background_scenes(const SceneOptions& options, std::size_t count) {
  std::vector<LabeledImage> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_background_scene(options, i));
  return out;
}

std::vector<SourceImage> make_reflection_scenes(const SceneOptions& options, std::size_t count) {
  std::vector<SourceImage> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_reflection_scene(options, i));
  return out;
}

void write_scene_sources(const std::filesystem::path& dir, const SceneOptions& options, std::size_t backgrounds,
                         std::size_t reflections) {
  for (std::size_t i = 0; i < backgrounds; ++i) {
    const LabeledImage li = make_background_scene(options, i);
    save_image(li.image, dir / "backgrounds" / (li.id + ".png"));
    save_semantic_map(li.label, dir / "labels" / (li.id + ".png"));
  }
  for (std::size_t i = 0; i < reflections; ++i) {
    const SourceImage si = make_reflection_scene(options, i);
    save_image(si.image, dir / "reflections" / (si.id + ".png"));
  }
}

}  // namespace srrn
