#include "srrn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "filters.hpp"
#include "srrn/error.hpp"

namespace srrn {

namespace detail {

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const double center = (size - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - center;
    k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2 * sigma * sigma));
    total += k[static_cast<std::size_t>(i)];
  }
  for (double& v : k) v /= total;
  return k;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  return gaussian_kernel(2 * radius + 1, sigma);
}

Plane correlate_valid(const Plane& in, std::span<const double> kv, std::span<const double> kh) {
  const int kH = static_cast<int>(kv.size()), kW = static_cast<int>(kh.size());
  const int oh = in.height - kH + 1, ow = in.width - kW + 1;
  Plane tmp(in.height, ow);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int j = 0; j < kW; ++j) s += kh[static_cast<std::size_t>(j)] * in.at(y, x + j);
      tmp.at(y, x) = s;
    }
  }
  Plane out(oh, ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kH; ++i) s += kv[static_cast<std::size_t>(i)] * tmp.at(y + i, x);
      out.at(y, x) = s;
    }
  }
  return out;
}

Plane correlate_valid_adjoint(const Plane& grad_out, std::span<const double> kv, std::span<const double> kh,
                              int in_height, int in_width) {
  const int kH = static_cast<int>(kv.size()), kW = static_cast<int>(kh.size());
  Plane tmp(in_height, grad_out.width);
  for (int y = 0; y < grad_out.height; ++y) {
    for (int x = 0; x < grad_out.width; ++x) {
      const double g = grad_out.at(y, x);
      for (int i = 0; i < kH; ++i) tmp.at(y + i, x) += kv[static_cast<std::size_t>(i)] * g;
    }
  }
  Plane out(in_height, in_width);
  for (int y = 0; y < in_height; ++y) {
    for (int x = 0; x < grad_out.width; ++x) {
      const double g = tmp.at(y, x);
      for (int j = 0; j < kW; ++j) out.at(y, x + j) += kh[static_cast<std::size_t>(j)] * g;
    }
  }
  return out;
}

Plane correlate_clamped(const Plane& in, std::span<const double> kv, std::span<const double> kh) {
  const int rv = static_cast<int>(kv.size()) / 2, rh = static_cast<int>(kh.size()) / 2;
  Plane tmp(in.height, in.width);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double s = 0.0;
      for (int j = 0; j < static_cast<int>(kh.size()); ++j) {
        s += kh[static_cast<std::size_t>(j)] * in.at(y, std::clamp(x + j - rh, 0, in.width - 1));
      }
      tmp.at(y, x) = s;
    }
  }
  Plane out(in.height, in.width);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double s = 0.0;
      for (int i = 0; i < static_cast<int>(kv.size()); ++i) {
        s += kv[static_cast<std::size_t>(i)] * tmp.at(std::clamp(y + i - rv, 0, in.height - 1), x);
      }
      out.at(y, x) = s;
    }
  }
  return out;
}

Plane correlate_clamped_adjoint(const Plane& grad_out, std::span<const double> kv, std::span<const double> kh) {
  const int rv = static_cast<int>(kv.size()) / 2, rh = static_cast<int>(kh.size()) / 2;
  const int h = grad_out.height, w = grad_out.width;
  Plane tmp(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double g = grad_out.at(y, x);
      for (int i = 0; i < static_cast<int>(kv.size()); ++i) {
        tmp.at(std::clamp(y + i - rv, 0, h - 1), x) += kv[static_cast<std::size_t>(i)] * g;
      }
    }
  }
  Plane out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double g = tmp.at(y, x);
      for (int j = 0; j < static_cast<int>(kh.size()); ++j) {
        out.at(y, std::clamp(x + j - rh, 0, w - 1)) += kh[static_cast<std::size_t>(j)] * g;
      }
    }
  }
  return out;
}

}  // namespace detail

using detail::Plane;

namespace {

void require_same_shape(const Planes& a, const Planes& b, const char* what) {
  if (!a.same_shape(b)) {
    fail(ErrorCode::dimension_mismatch, fmt::format("{}: {}x{}x{} vs {}x{}x{}", what, a.channels(), a.height(),
                                                    a.width(), b.channels(), b.height(), b.width()));
  }
}

Plane plane_of(const Planes& p, int c) { return Plane(p.height(), p.width(), p.plane(c)); }

}  // namespace

void SsimParams::validate() const {
  if (window_size < 3 || window_size % 2 == 0) {
    fail(ErrorCode::invalid_argument, fmt::format("SSIM window must be odd and >= 3, got {}", window_size));
  }
  if (!(window_sigma > 0) || !(k1 > 0) || !(k2 > 0) || !(dynamic_range > 0)) {
    fail(ErrorCode::invalid_argument, "SSIM sigma, k1, k2 and dynamic range must be positive");
  }
}

double psnr(const Planes& a, const Planes& b, double dynamic_range) {
  require_same_shape(a, b, "psnr dimension mismatch");
  if (a.size() == 0) fail(ErrorCode::invalid_argument, "psnr of empty images");
  double sse = 0.0;
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) sse += (da[i] - db[i]) * (da[i] - db[i]);
  const double mse = sse / static_cast<double>(da.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(dynamic_range * dynamic_range / mse);
}

double psnr(const ImageTensor& a, const ImageTensor& b, double dynamic_range) {
  return psnr(a.planes(), b.planes(), dynamic_range);
}

SsimGradient ssim_with_gradient(const Planes& a, const Planes& b, const SsimParams& params) {
  params.validate();
  require_same_shape(a, b, "ssim dimension mismatch");
  const int ws = params.window_size;
  if (a.height() < ws || a.width() < ws) {
    fail(ErrorCode::invalid_argument,
         fmt::format("image {}x{} smaller than SSIM window {}", a.height(), a.width(), ws));
  }
  const std::vector<double> g = detail::gaussian_kernel(ws, params.window_sigma);
  const double c1 = (params.k1 * params.dynamic_range) * (params.k1 * params.dynamic_range);
  const double c2 = (params.k2 * params.dynamic_range) * (params.k2 * params.dynamic_range);
  const int h = a.height(), w = a.width();

  SsimGradient out;
  out.grad = Planes(a.channels(), h, w);
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    const Plane x = plane_of(a, c), y = plane_of(b, c);
    Plane xx(h, w), yy(h, w), xy(h, w);
    for (std::size_t i = 0; i < x.v.size(); ++i) {
      xx.v[i] = x.v[i] * x.v[i];
      yy.v[i] = y.v[i] * y.v[i];
      xy.v[i] = x.v[i] * y.v[i];
    }
    const Plane mx = detail::correlate_valid(x, g, g), my = detail::correlate_valid(y, g, g);
    const Plane exx = detail::correlate_valid(xx, g, g), eyy = detail::correlate_valid(yy, g, g),
                exy = detail::correlate_valid(xy, g, g);
    const std::size_t m = mx.v.size();
    const double scale = 1.0 / (static_cast<double>(m) * a.channels());

    Plane d_alpha(mx.height, mx.width), d_beta(mx.height, mx.width), d_gamma(mx.height, mx.width);
    double channel_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double ux = mx.v[i], uy = my.v[i];
      const double vx = exx.v[i] - ux * ux, vy = eyy.v[i] - uy * uy, cxy = exy.v[i] - ux * uy;
      const double a1 = 2 * ux * uy + c1, a2 = 2 * cxy + c2;
      const double b1 = ux * ux + uy * uy + c1, b2 = vx + vy + c2;
      const double s = (a1 * a2) / (b1 * b2);
      channel_sum += s;
      const double ds_dux = 2 * uy * a2 / (b1 * b2) - s * 2 * ux / b1;
      const double ds_dvx = -s / b2;
      const double ds_dcxy = 2 * a1 / (b1 * b2);
      d_alpha.v[i] = scale * (ds_dux - 2 * ux * ds_dvx - uy * ds_dcxy);
      d_beta.v[i] = scale * ds_dvx;
      d_gamma.v[i] = scale * ds_dcxy;
    }
    total += channel_sum / static_cast<double>(m);

    const Plane ga = detail::correlate_valid_adjoint(d_alpha, g, g, h, w);
    const Plane gb = detail::correlate_valid_adjoint(d_beta, g, g, h, w);
    const Plane gc = detail::correlate_valid_adjoint(d_gamma, g, g, h, w);
    auto dst = out.grad.plane(c);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = ga.v[i] + 2 * x.v[i] * gb.v[i] + y.v[i] * gc.v[i];
  }
  out.value = total / a.channels();
  return out;
}

double ssim(const Planes& a, const Planes& b, const SsimParams& params) {
  return ssim_with_gradient(a, b, params).value;
}

double ssim(const ImageTensor& a, const ImageTensor& b, const SsimParams& params) {
  return ssim(a.planes(), b.planes(), params);
}

ConfusionMatrix::ConfusionMatrix(int classes)
    : classes_(classes),
      counts_(static_cast<std::size_t>(classes) * classes, 0),
      missed_(static_cast<std::size_t>(classes), 0) {
  if (classes < 1) fail(ErrorCode::invalid_argument, "confusion matrix needs >= 1 class");
}

void ConfusionMatrix::add(const SemanticMap& pred, const SemanticMap& gt, std::uint8_t ignore_index) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    fail(ErrorCode::dimension_mismatch, "miou dimension mismatch");
  }
  const auto p = pred.labels(), t = gt.labels();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] == ignore_index) continue;
    if (t[i] >= classes_) fail(ErrorCode::invalid_label, fmt::format("ground-truth label {} out of range", t[i]));
    ++total_;
    if (p[i] < classes_) {
      ++counts_[static_cast<std::size_t>(t[i]) * classes_ + p[i]];
    } else {
      ++missed_[t[i]];
    }
  }
}

std::optional<double> ConfusionMatrix::iou(int cls) const {
  std::uint64_t row = missed_[static_cast<std::size_t>(cls)], col = 0;
  for (int k = 0; k < classes_; ++k) {
    row += count(cls, k);
    col += count(k, cls);
  }
  const std::uint64_t inter = count(cls, cls);
  const std::uint64_t uni = row + col - inter;
  if (uni == 0) return std::nullopt;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<double> ConfusionMatrix::miou() const {
  if (total_ == 0) return std::nullopt;
  double sum = 0.0;
  int present = 0;
  for (int k = 0; k < classes_; ++k) {
    if (const auto v = iou(k)) {
      sum += *v;
      ++present;
    }
  }
  return sum / present;
}

std::optional<double> miou(const SemanticMap& pred, const SemanticMap& gt, int class_count,
                           std::uint8_t ignore_index) {
  ConfusionMatrix cm(class_count);
  cm.add(pred, gt, ignore_index);
  return cm.miou();
}

Planes canny(const ImageTensor& image, const CannyParams& params) {
  const int h = image.height(), w = image.width();
  Plane gray(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) gray.at(y, x) = (image.at(0, y, x) + image.at(1, y, x) + image.at(2, y, x)) / 3.0;
  }
  const std::vector<double> g = detail::gaussian_kernel(params.sigma);
  const Plane smooth = detail::correlate_clamped(gray, g, g);
  const Plane gx = detail::correlate_clamped(smooth, detail::kSobelSmooth, detail::kSobelDiff);
  const Plane gy = detail::correlate_clamped(smooth, detail::kSobelDiff, detail::kSobelSmooth);
  Plane mag(h, w);
  double peak = 0.0;
  for (std::size_t i = 0; i < mag.v.size(); ++i) {
    mag.v[i] = std::hypot(gx.v[i], gy.v[i]);
    peak = std::max(peak, mag.v[i]);
  }
  Planes edges(1, h, w);
  // Rounding noise on flat images must not produce edges.
  if (peak <= 1e-9) return edges;

  const auto m = [&](int y, int x) { return mag.at(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)); };
  Plane thin(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = mag.at(y, x);
      if (v <= 0.0) continue;
      double angle = std::atan2(gy.at(y, x), gx.at(y, x)) * 180.0 / 3.14159265358979323846;
      if (angle < 0) angle += 180.0;
      int dy = 0, dx = 0;
      if (angle < 22.5 || angle >= 157.5) {
        dx = 1;
      } else if (angle < 67.5) {
        dy = 1, dx = 1;
      } else if (angle < 112.5) {
        dy = 1;
      } else {
        dy = 1, dx = -1;
      }
      // Plateaus keep the later pixel only.
      if (v >= m(y + dy, x + dx) && v > m(y - dy, x - dx)) thin.at(y, x) = v;
    }
  }

  const double high = params.high_ratio * peak, low = params.low_ratio * peak;
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (thin.at(y, x) >= high) {
        edges.at(0, y, x) = 1.0;
        queue.emplace_back(y, x);
      }
    }
  }
  while (!queue.empty()) {
    const auto [y, x] = queue.front();
    queue.pop_front();
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int ny = y + dy, nx = x + dx;
        if (ny < 0 || nx < 0 || ny >= h || nx >= w || edges.at(0, ny, nx) != 0.0) continue;
        if (thin.at(ny, nx) >= low) {
          edges.at(0, ny, nx) = 1.0;
          queue.emplace_back(ny, nx);
        }
      }
    }
  }
  return edges;
}

namespace {

struct SoftEdgeTerms {
  Plane gx, gy, mag;
};

SoftEdgeTerms soft_edge_terms(const Plane& x, const SoftEdgeParams& params) {
  const std::vector<double> g = detail::gaussian_kernel(params.sigma);
  const Plane smooth = detail::correlate_clamped(x, g, g);
  SoftEdgeTerms t;
  t.gx = detail::correlate_clamped(smooth, detail::kSobelSmooth, detail::kSobelDiff);
  t.gy = detail::correlate_clamped(smooth, detail::kSobelDiff, detail::kSobelSmooth);
  t.mag = Plane(x.height, x.width);
  for (std::size_t i = 0; i < t.mag.v.size(); ++i) {
    t.mag.v[i] = std::sqrt(t.gx.v[i] * t.gx.v[i] + t.gy.v[i] * t.gy.v[i] + params.eps);
  }
  return t;
}

}  // namespace

Planes soft_edges(const Planes& image, const SoftEdgeParams& params) {
  Planes out(image.channels(), image.height(), image.width());
  const double floor = std::sqrt(params.eps);
  for (int c = 0; c < image.channels(); ++c) {
    const SoftEdgeTerms t = soft_edge_terms(plane_of(image, c), params);
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = t.mag.v[i] - floor;
  }
  return out;
}

Planes soft_edges_backward(const Planes& image, const Planes& grad_edges, const SoftEdgeParams& params) {
  require_same_shape(image, grad_edges, "soft edge gradient shape mismatch");
  const std::vector<double> g = detail::gaussian_kernel(params.sigma);
  Planes out(image.channels(), image.height(), image.width());
  for (int c = 0; c < image.channels(); ++c) {
    const SoftEdgeTerms t = soft_edge_terms(plane_of(image, c), params);
    const auto up = grad_edges.plane(c);
    Plane dgx(image.height(), image.width()), dgy(image.height(), image.width());
    for (std::size_t i = 0; i < up.size(); ++i) {
      dgx.v[i] = up[i] * t.gx.v[i] / t.mag.v[i];
      dgy.v[i] = up[i] * t.gy.v[i] / t.mag.v[i];
    }
    Plane ds = detail::correlate_clamped_adjoint(dgx, detail::kSobelSmooth, detail::kSobelDiff);
    const Plane ds2 = detail::correlate_clamped_adjoint(dgy, detail::kSobelDiff, detail::kSobelSmooth);
    for (std::size_t i = 0; i < ds.v.size(); ++i) ds.v[i] += ds2.v[i];
    const Plane dx = detail::correlate_clamped_adjoint(ds, g, g);
    std::copy(dx.v.begin(), dx.v.end(), out.plane(c).begin());
  }
  return out;
}

Planes edge_map(const ImageTensor& image, EdgeMode mode) {
  if (mode == EdgeMode::evaluation_canny) return canny(image);
  return soft_edges(image.planes());
}

double edge_distance(const Planes& a, const Planes& b) {
  require_same_shape(a, b, "edge_distance dimension mismatch");
  double s = 0.0;
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) s += (da[i] - db[i]) * (da[i] - db[i]);
  return std::sqrt(s);
}

Interval confidence_interval(std::span<const double> samples, double level) {
  if (samples.size() < 2) fail(ErrorCode::invalid_argument, "confidence interval needs >= 2 samples");
  if (!(level > 0.0 && level < 1.0)) fail(ErrorCode::invalid_argument, "confidence level must be in (0, 1)");
  const double n = static_cast<double>(samples.size());
  // Shifted by the first sample so constant input has exactly zero spread.
  const double shift = samples.front();
  double sum = 0.0;
  for (double v : samples) sum += v - shift;
  const double offset = sum / n;
  const double mean = shift + offset;
  double ss = 0.0;
  for (double v : samples) ss += (v - shift - offset) * (v - shift - offset);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::normal_distribution<double> normal;
  const double z = boost::math::quantile(normal, 0.5 + level / 2.0);
  return {mean, z * sd / std::sqrt(n)};
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    fail(ErrorCode::invalid_argument, "spearman correlation needs two equal-length series of >= 2 values");
  }
  const std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace srrn
