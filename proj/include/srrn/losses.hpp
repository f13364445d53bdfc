#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srrn/core_data.hpp"
#include "srrn/metrics.hpp"

namespace srrn {

enum class SigmaMode { fixed, learnable };
std::string_view to_string(SigmaMode m);
SigmaMode parse_sigma_mode(std::string_view s);

/// Scalar weights of the multi-task objective.
///
///   L_B   = w1_1 (1 - SSIM) + w1_2 L1 + w1_3 ||E(B^) - E(B)||_F
///   total = (w1 L_B + w2 L_R) / (2 sigma_R^2) + w3 L_S / sigma_S^2 + w4 L_reg
///
/// In learnable mode sigma = exp(s) for free scalars s, and log sigma_R + log sigma_S
/// is added to the total.
struct LossWeights {
  double w1 = 1.0;
  double w1_1 = 0.6;
  double w1_2 = 1.0;
  double w1_3 = 0.0003;
  double w2 = 0.8;
  double w3 = 1.0;
  double w4 = 1.0;
  double sigma_R = 1.0;
  double sigma_S = 1.0;
  SigmaMode sigma_mode = SigmaMode::fixed;

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// A scalar loss and its gradient with respect to the prediction argument.
struct LossGradient {
  double value = 0.0;
  Planes grad;
};

struct BackgroundTerms {
  double ssim_term = 0.0;  ///< w1_1 (1 - SSIM)
  double l1_term = 0.0;    ///< w1_2 L1
  double edge_term = 0.0;  ///< w1_3 ||E(B^) - E(B)||_F
  double total() const { return ssim_term + l1_term + edge_term; }
};

struct BackgroundLoss {
  BackgroundTerms terms;
  Planes grad;
  double value() const { return terms.total(); }
};

BackgroundLoss background_loss_with_gradient(const Planes& b_hat, const Planes& b, const LossWeights& weights,
                                             const SsimParams& ssim_params = {},
                                             const SoftEdgeParams& edge_params = {});
double background_loss(const ImageTensor& b_hat, const ImageTensor& b, const LossWeights& weights = {},
                       const SsimParams& ssim_params = {});

/// Mean absolute difference.
LossGradient reflection_loss_with_gradient(const Planes& r_hat, const Planes& r);
double reflection_loss(const ImageTensor& r_hat, const ImageTensor& r);

inline constexpr double kProbabilityEpsilon = 1e-7;

/// Per-pixel, per-class binary cross entropy between one-hot targets and softmax
/// probabilities clipped to [eps, 1 - eps], summed over classes and averaged over
/// scored pixels. Gradient is with respect to the logits. nullopt when no pixel is scored.
std::optional<LossGradient> semantic_loss_with_gradient(const Planes& logits, const SemanticMap& gt,
                                                        double eps = kProbabilityEpsilon);
std::optional<double> semantic_loss(const SemanticLogits& logits, const SemanticMap& gt);

/// One trainable parameter tensor, or a frozen one that is excluded from the sum.
struct ParameterGroup {
  std::span<const double> values;
  bool trainable = true;
};

/// Sum over trainable groups of their (unsquared) L2 norms.
double l2_regularization(std::span<const ParameterGroup> groups);
/// Gradient p / ||p|| for one group (zero for an all-zero group).
std::vector<double> l2_norm_gradient(std::span<const double> values);

struct LossBreakdown {
  double l_b = 0.0;
  double l_r = 0.0;
  double l_s = 0.0;
  double l_reg = 0.0;
  double total = 0.0;
};

/// Partial derivatives of the total with respect to the components and log-sigmas.
struct TotalLossGradient {
  double d_l_b = 0.0;
  double d_l_r = 0.0;
  double d_l_s = 0.0;
  double d_l_reg = 0.0;
  double d_log_sigma_R = 0.0;
  double d_log_sigma_S = 0.0;
};

LossBreakdown total_loss(double l_b, double l_r, double l_s, double l_reg, const LossWeights& weights);
TotalLossGradient total_loss_gradient(double l_b, double l_r, double l_s, double l_reg, const LossWeights& weights);

}  // namespace srrn
