#include "srrn/losses.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "srrn/error.hpp"

namespace srrn {

std::string_view to_string(SigmaMode m) { return m == SigmaMode::fixed ? "fixed" : "learnable"; }

SigmaMode parse_sigma_mode(std::string_view s) {
  if (s == "fixed") return SigmaMode::fixed;
  if (s == "learnable") return SigmaMode::learnable;
  fail(ErrorCode::invalid_argument, fmt::format("unknown sigma_mode '{}'", s));
}

void LossWeights::validate() const {
  for (double w : {w1, w1_1, w1_2, w1_3, w2, w3, w4}) {
    if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorCode::invalid_argument, "loss weights must be finite and >= 0");
  }
  if (!(sigma_R > 0.0) || !(sigma_S > 0.0) || !std::isfinite(sigma_R) || !std::isfinite(sigma_S)) {
    fail(ErrorCode::invalid_argument, "sigma_R and sigma_S must be finite and > 0");
  }
}

namespace {

void require_same_shape(const Planes& a, const Planes& b, const char* what) {
  if (!a.same_shape(b)) fail(ErrorCode::dimension_mismatch, fmt::format("{} dimension mismatch", what));
}

}  // namespace

BackgroundLoss background_loss_with_gradient(const Planes& b_hat, const Planes& b, const LossWeights& weights,
                                             const SsimParams& ssim_params, const SoftEdgeParams& edge_params) {
  require_same_shape(b_hat, b, "background_loss");
  BackgroundLoss out;
  out.grad = Planes(b_hat.channels(), b_hat.height(), b_hat.width());
  auto grad = out.grad.data();

  if (weights.w1_1 != 0.0) {
    const SsimGradient s = ssim_with_gradient(b_hat, b, ssim_params);
    out.terms.ssim_term = weights.w1_1 * (1.0 - s.value);
    const auto gs = s.grad.data();
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] -= weights.w1_1 * gs[i];
  }

  if (weights.w1_2 != 0.0) {
    const LossGradient l1 = reflection_loss_with_gradient(b_hat, b);
    out.terms.l1_term = weights.w1_2 * l1.value;
    const auto gl = l1.grad.data();
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += weights.w1_2 * gl[i];
  }

  if (weights.w1_3 != 0.0) {
    const Planes e_hat = soft_edges(b_hat, edge_params);
    const Planes e = soft_edges(b, edge_params);
    const double dist = edge_distance(e_hat, e);
    out.terms.edge_term = weights.w1_3 * dist;
    // The norm is not differentiable at 0; take the zero subgradient there.
    if (dist > 0.0) {
      Planes up(e_hat.channels(), e_hat.height(), e_hat.width());
      const auto dh = e_hat.data(), d = e.data();
      auto u = up.data();
      for (std::size_t i = 0; i < u.size(); ++i) u[i] = weights.w1_3 * (dh[i] - d[i]) / dist;
      const Planes ge = soft_edges_backward(b_hat, up, edge_params);
      const auto g = ge.data();
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
    }
  }
  return out;
}

double background_loss(const ImageTensor& b_hat, const ImageTensor& b, const LossWeights& weights,
                       const SsimParams& ssim_params) {
  return background_loss_with_gradient(b_hat.planes(), b.planes(), weights, ssim_params).value();
}

LossGradient reflection_loss_with_gradient(const Planes& r_hat, const Planes& r) {
  require_same_shape(r_hat, r, "reflection_loss");
  LossGradient out;
  out.grad = Planes(r_hat.channels(), r_hat.height(), r_hat.width());
  const auto a = r_hat.data(), b = r.data();
  auto g = out.grad.data();
  const double inv_n = 1.0 / static_cast<double>(a.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += std::abs(d);
    g[i] = d > 0 ? inv_n : (d < 0 ? -inv_n : 0.0);
  }
  out.value = sum * inv_n;
  return out;
}

double reflection_loss(const ImageTensor& r_hat, const ImageTensor& r) {
  return reflection_loss_with_gradient(r_hat.planes(), r.planes()).value;
}

std::optional<LossGradient> semantic_loss_with_gradient(const Planes& logits, const SemanticMap& gt, double eps) {
  if (logits.height() != gt.height() || logits.width() != gt.width()) {
    fail(ErrorCode::dimension_mismatch, "semantic_loss dimension mismatch");
  }
  const int classes = logits.channels();
  const std::size_t n = logits.plane_size();
  const auto labels = gt.labels();
  const auto z = logits.data();

  std::size_t scored = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == kIgnoreLabel) continue;
    check_label(labels[i], classes, static_cast<int>(i) / gt.width(), static_cast<int>(i) % gt.width());
    ++scored;
  }
  if (scored == 0) return std::nullopt;

  LossGradient out;
  out.grad = Planes(classes, logits.height(), logits.width());
  auto grad = out.grad.data();
  const double inv = 1.0 / static_cast<double>(scored);
  std::vector<double> p(static_cast<std::size_t>(classes)), dp(static_cast<std::size_t>(classes));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == kIgnoreLabel) continue;
    double peak = z[i];
    for (int k = 1; k < classes; ++k) peak = std::max(peak, z[k * n + i]);
    double denom = 0.0;
    for (int k = 0; k < classes; ++k) {
      p[static_cast<std::size_t>(k)] = std::exp(z[k * n + i] - peak);
      denom += p[static_cast<std::size_t>(k)];
    }
    double pixel = 0.0;
    double weighted = 0.0;
    for (int k = 0; k < classes; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      p[ku] /= denom;
      const bool target = labels[i] == k;
      const bool clipped = p[ku] < eps || p[ku] > 1.0 - eps;
      const double q = std::clamp(p[ku], eps, 1.0 - eps);
      pixel += target ? -std::log(q) : -std::log(1.0 - q);
      dp[ku] = clipped ? 0.0 : (target ? -1.0 / q : 1.0 / (1.0 - q));
      weighted += dp[ku] * p[ku];
    }
    total += pixel;
    // Softmax Jacobian: dL/dz_k = p_k (dL/dp_k - sum_m dL/dp_m p_m).
    for (int k = 0; k < classes; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      grad[k * n + i] = inv * p[ku] * (dp[ku] - weighted);
    }
  }
  out.value = total * inv;
  return out;
}

std::optional<double> semantic_loss(const SemanticLogits& logits, const SemanticMap& gt) {
  const auto r = semantic_loss_with_gradient(logits.scores(), gt);
  if (!r) return std::nullopt;
  return r->value;
}

double l2_regularization(std::span<const ParameterGroup> groups) {
  double total = 0.0;
  for (const ParameterGroup& g : groups) {
    if (!g.trainable) continue;
    double ss = 0.0;
    for (double v : g.values) ss += v * v;
    total += std::sqrt(ss);
  }
  return total;
}

std::vector<double> l2_norm_gradient(std::span<const double> values) {
  double ss = 0.0;
  for (double v : values) ss += v * v;
  std::vector<double> g(values.size(), 0.0);
  if (ss == 0.0) return g;
  const double inv = 1.0 / std::sqrt(ss);
  for (std::size_t i = 0; i < values.size(); ++i) g[i] = values[i] * inv;
  return g;
}

namespace {

void require_component(double v, const char* name) {
  if (!std::isfinite(v)) fail(ErrorCode::non_finite, fmt::format("loss component {} is not finite", name));
  if (v < 0.0) fail(ErrorCode::invalid_argument, fmt::format("loss component {} is negative", name));
}

}  // namespace

LossBreakdown total_loss(double l_b, double l_r, double l_s, double l_reg, const LossWeights& weights) {
  require_component(l_b, "l_b");
  require_component(l_r, "l_r");
  require_component(l_s, "l_s");
  require_component(l_reg, "l_reg");
  const double vr = weights.sigma_R * weights.sigma_R;
  const double vs = weights.sigma_S * weights.sigma_S;
  LossBreakdown out{l_b, l_r, l_s, l_reg, 0.0};
  out.total = (weights.w1 * l_b + weights.w2 * l_r) / (2.0 * vr) + weights.w3 * l_s / vs + weights.w4 * l_reg;
  if (weights.sigma_mode == SigmaMode::learnable) out.total += std::log(weights.sigma_R) + std::log(weights.sigma_S);
  return out;
}

TotalLossGradient total_loss_gradient(double l_b, double l_r, double l_s, double /*l_reg*/,
                                      const LossWeights& weights) {
  const double vr = weights.sigma_R * weights.sigma_R;
  const double vs = weights.sigma_S * weights.sigma_S;
  TotalLossGradient g;
  g.d_l_b = weights.w1 / (2.0 * vr);
  g.d_l_r = weights.w2 / (2.0 * vr);
  g.d_l_s = weights.w3 / vs;
  g.d_l_reg = weights.w4;
  if (weights.sigma_mode == SigmaMode::learnable) {
    // d/ds of e^{-2s} X / 2 is -e^{-2s} X; d/ds of w3 e^{-2s} l_s is -2 w3 e^{-2s} l_s.
    g.d_log_sigma_R = -(weights.w1 * l_b + weights.w2 * l_r) / vr + 1.0;
    g.d_log_sigma_S = -2.0 * weights.w3 * l_s / vs + 1.0;
  }
  return g;
}

}  // namespace srrn
