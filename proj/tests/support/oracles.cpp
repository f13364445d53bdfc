#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace srrn::oracle {

double ssim(const Planes& a, const Planes& b, int window, double sigma, double k1, double k2, double range) {
  const int r = window / 2;
  std::vector<long double> w(static_cast<std::size_t>(window * window));
  long double norm = 0;
  for (int i = 0; i < window; ++i) {
    for (int j = 0; j < window; ++j) {
      const long double d2 = static_cast<long double>((i - r) * (i - r) + (j - r) * (j - r));
      w[static_cast<std::size_t>(i * window + j)] = std::exp(-d2 / (2.0L * sigma * sigma));
      norm += w[static_cast<std::size_t>(i * window + j)];
    }
  }
  for (auto& v : w) v /= norm;
  const long double c1 = (k1 * range) * (k1 * range);
  const long double c2 = (k2 * range) * (k2 * range);

  long double total = 0;
  for (int c = 0; c < a.channels(); ++c) {
    long double sum = 0;
    int count = 0;
    for (int y = 0; y + window <= a.height(); ++y) {
      for (int x = 0; x + window <= a.width(); ++x) {
        long double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < window; ++i) {
          for (int j = 0; j < window; ++j) {
            const long double wt = w[static_cast<std::size_t>(i * window + j)];
            const long double va = a.at(c, y + i, x + j), vb = b.at(c, y + i, x + j);
            ma += wt * va;
            mb += wt * vb;
            saa += wt * va * va;
            sbb += wt * vb * vb;
            sab += wt * va * vb;
          }
        }
        const long double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
    total += sum / count;
  }
  return static_cast<double>(total / a.channels());
}

double psnr(const Planes& a, const Planes& b, double range) {
  long double se = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double d = static_cast<long double>(a.data()[i]) - b.data()[i];
    se += d * d;
  }
  const long double mse = se / a.size();
  if (mse == 0) return INFINITY;
  return static_cast<double>(10.0L * std::log10(static_cast<long double>(range) * range / mse));
}

std::optional<double> miou(const SemanticMap& pred, const SemanticMap& gt, int classes, std::uint8_t ignore) {
  std::vector<std::size_t> scored;
  for (std::size_t i = 0; i < gt.labels().size(); ++i) {
    if (gt.labels()[i] != ignore) scored.push_back(i);
  }
  if (scored.empty()) return std::nullopt;
  double sum = 0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    std::set<std::size_t> in_pred, in_gt;
    for (std::size_t i : scored) {
      if (pred.labels()[i] == c) in_pred.insert(i);
      if (gt.labels()[i] == c) in_gt.insert(i);
    }
    std::set<std::size_t> uni = in_pred, inter;
    uni.insert(in_gt.begin(), in_gt.end());
    std::set_intersection(in_pred.begin(), in_pred.end(), in_gt.begin(), in_gt.end(),
                          std::inserter(inter, inter.begin()));
    if (uni.empty()) continue;
    sum += static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    ++present;
  }
  return sum / present;
}

double frobenius_distance(const Planes& a, const Planes& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double d = static_cast<long double>(a.data()[i]) - b.data()[i];
    s += d * d;
  }
  return static_cast<double>(std::sqrt(s));
}

std::vector<double> numeric_gradient(const std::function<double(const Planes&)>& f, const Planes& x,
                                     std::span<const std::size_t> coords, double h) {
  std::vector<double> out;
  Planes p = x;
  for (std::size_t i : coords) {
    const double orig = p.data()[i];
    p.data()[i] = orig + h;
    const double up = f(p);
    p.data()[i] = orig - h;
    const double down = f(p);
    p.data()[i] = orig;
    out.push_back((up - down) / (2 * h));
  }
  return out;
}

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace srrn::oracle
