#pragma once

#include <optional>
#include <span>
#include <vector>

#include "srrn/core_data.hpp"

namespace srrn {

/// Gaussian-window SSIM parameters. Defaults are the reference parameterization
/// (11x11 window, sigma 1.5, K1 = 0.01, K2 = 0.03) at dynamic range 1.
struct SsimParams {
  int window_size = 11;
  double window_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;

  void validate() const;
};

/// 10 log10(range^2 / MSE) over all channels; +infinity when the images are identical.
double psnr(const ImageTensor& a, const ImageTensor& b, double dynamic_range = 1.0);
double psnr(const Planes& a, const Planes& b, double dynamic_range = 1.0);

/// Mean of the local SSIM map ('valid' Gaussian filtering) per channel, averaged across channels.
double ssim(const ImageTensor& a, const ImageTensor& b, const SsimParams& params = {});
double ssim(const Planes& a, const Planes& b, const SsimParams& params = {});

struct SsimGradient {
  double value = 0.0;
  /// d ssim / d a
  Planes grad;
};

SsimGradient ssim_with_gradient(const Planes& a, const Planes& b, const SsimParams& params = {});

/// Rows are ground truth, columns are predictions. Pixels whose ground truth is the
/// ignore label are not scored; a scored pixel predicted as ignore counts as a miss.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes);

  void add(const SemanticMap& pred, const SemanticMap& gt, std::uint8_t ignore_index = kIgnoreLabel);

  int classes() const noexcept { return classes_; }
  std::uint64_t count(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt) * classes_ + pred]; }
  std::uint64_t total() const noexcept { return total_; }

  /// IoU of one class, absent when the class appears in neither gt nor prediction.
  std::optional<double> iou(int cls) const;
  /// Mean IoU over classes present in gt or prediction; absent when nothing was scored.
  std::optional<double> miou() const;

 private:
  int classes_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> missed_;
  std::uint64_t total_ = 0;
};

/// nullopt is the "no scored pixels" signal.
std::optional<double> miou(const SemanticMap& pred, const SemanticMap& gt, int class_count = kClassCount,
                           std::uint8_t ignore_index = kIgnoreLabel);

enum class EdgeMode { evaluation_canny, training_soft };

struct CannyParams {
  double sigma = 1.4;
  double low_ratio = 0.1;
  double high_ratio = 0.2;
};

struct SoftEdgeParams {
  double sigma = 1.0;
  /// Smoothing inside sqrt(gx^2 + gy^2 + eps); the map is offset so flat regions read 0.
  double eps = 1e-6;
};

/// Binary 1 x H x W map of the luminance via Gaussian smoothing, Sobel, non-maximum
/// suppression and hysteresis (thresholds relative to the maximum gradient).
Planes canny(const ImageTensor& image, const CannyParams& params = {});

/// Per-channel Gaussian-smoothed Sobel gradient magnitude, differentiable.
Planes soft_edges(const Planes& image, const SoftEdgeParams& params = {});

/// Vector-Jacobian product of soft_edges at `image` with upstream gradient `grad_edges`.
Planes soft_edges_backward(const Planes& image, const Planes& grad_edges, const SoftEdgeParams& params = {});

Planes edge_map(const ImageTensor& image, EdgeMode mode);

/// Frobenius norm of a - b.
double edge_distance(const Planes& a, const Planes& b);

struct Interval {
  double mean = 0.0;
  double half_width = 0.0;
};

/// Normal-approximation interval mean +- z(level) s / sqrt(n), s the sample standard deviation.
Interval confidence_interval(std::span<const double> samples, double level = 0.95);

/// Spearman rank correlation (average ranks for ties).
double spearman_correlation(std::span<const double> x, std::span<const double> y);

}  // namespace srrn
