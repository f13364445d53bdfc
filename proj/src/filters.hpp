#pragma once

// Separable single-plane filters shared by the metric and loss code.
// Every filter has an adjoint so losses built on them can be differentiated.

#include <span>
#include <vector>

namespace srrn::detail {

std::vector<double> gaussian_kernel(int size, double sigma);
/// Kernel of width 2 * ceil(3 sigma) + 1.
std::vector<double> gaussian_kernel(double sigma);

struct Plane {
  int height = 0;
  int width = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(int h, int w, double fill = 0.0) : height(h), width(w), v(static_cast<std::size_t>(h) * w, fill) {}
  Plane(int h, int w, std::span<const double> data) : height(h), width(w), v(data.begin(), data.end()) {}

  double& at(int y, int x) { return v[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

/// 'valid' correlation with kh (vertical) x kw (horizontal) separable kernels.
Plane correlate_valid(const Plane& in, std::span<const double> kv, std::span<const double> kh);
/// Adjoint of correlate_valid; returns a plane of the original input size.
Plane correlate_valid_adjoint(const Plane& grad_out, std::span<const double> kv, std::span<const double> kh,
                              int in_height, int in_width);

/// 'same' correlation with replicated borders.
Plane correlate_clamped(const Plane& in, std::span<const double> kv, std::span<const double> kh);
Plane correlate_clamped_adjoint(const Plane& grad_out, std::span<const double> kv, std::span<const double> kh);

inline constexpr double kSobelDiff[3] = {-1.0, 0.0, 1.0};
inline constexpr double kSobelSmooth[3] = {1.0, 2.0, 1.0};

}  // namespace srrn::detail
