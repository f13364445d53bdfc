#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <opencv2/imgproc.hpp>

#include "srrn/error.hpp"
#include "srrn/metrics.hpp"
#include "srrn/random.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace srrn {
namespace {

using testing::random_image;
using testing::random_planes;

ImageTensor uniform(double v, int n = 16) { return ImageTensor(n, n, v); }

ImageTensor step_image(int n) {
  ImageTensor img(n, n);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < n; ++y) {
      for (int x = n / 2; x < n; ++x) img.set(c, y, x, 1.0);
    }
  }
  return img;
}

TEST(Psnr, Examples) {
  const ImageTensor a = random_image(8, 8, 1);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_NEAR(psnr(uniform(0.3), uniform(0.4)), 20.0, 1e-9);
  EXPECT_NEAR(psnr(uniform(0.0), uniform(1.0)), 0.0, 1e-12);
  EXPECT_THROW(psnr(uniform(0.1, 4), uniform(0.1, 5)), Error);
}

TEST(Psnr, DecreasesWithNoiseAmplitude) {
  const ImageTensor base = uniform(0.5);
  const Planes noise = random_planes(3, 16, 16, 2, -1.0, 1.0);
  double prev = INFINITY;
  for (double amp : {0.01, 0.02, 0.05, 0.1, 0.2, 0.4}) {
    Planes p = base.planes();
    for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] += amp * noise.data()[i];
    const double v = psnr(ImageTensor(p), base);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Ssim, Examples) {
  const ImageTensor a = random_image(16, 16, 3);
  EXPECT_EQ(ssim(a, a), 1.0);
  const double expected = (2 * 0.16 + 1e-4) / (0.68 + 1e-4);
  EXPECT_NEAR(ssim(uniform(0.2), uniform(0.8)), expected, 1e-12);
  EXPECT_NEAR(expected, 0.4707, 1e-4);
}

TEST(Ssim, SymmetricAndBounded) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const ImageTensor a = random_image(32, 32, 10 + s), b = random_image(32, 32, 20 + s);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-14);
    EXPECT_LT(ssim(a, b), 1.0 - 1e-9);
  }
}

TEST(Ssim, MatchesBruteForce) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Planes a = random_planes(3, 16, 16, 30 + s), b = random_planes(3, 16, 16, 40 + s);
    EXPECT_NEAR(ssim(a, b), oracle::ssim(a, b), 1e-9);
  }
}

TEST(Ssim, ValidatesInputs) {
  EXPECT_THROW(ssim(uniform(0.1, 8), uniform(0.1, 8)), Error);
  SsimParams p;
  p.window_size = 4;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Ssim, GradientMatchesFiniteDifferences) {
  const Planes a = random_planes(3, 16, 16, 50), b = random_planes(3, 16, 16, 51);
  const SsimGradient g = ssim_with_gradient(a, b);
  EXPECT_NEAR(g.value, ssim(a, b), 1e-14);
  std::vector<std::size_t> coords;
  for (std::size_t i = 0; i < a.size(); i += 23) coords.push_back(i);
  const auto num = oracle::numeric_gradient([&](const Planes& x) { return ssim(x, b); }, a, coords);
  for (std::size_t k = 0; k < coords.size(); ++k) {
    EXPECT_LT(oracle::relative_error(g.grad.data()[coords[k]], num[k], 1e-4), 1e-4) << coords[k];
  }
}

TEST(Miou, Examples) {
  const SemanticMap gt(1, 4, {0, 0, 1, 1}), pred(1, 4, {0, 1, 1, 1});
  EXPECT_NEAR(*miou(gt, gt, 2), 1.0, 1e-15);
  EXPECT_NEAR(*miou(pred, gt, 2), 7.0 / 12.0, 1e-15);
  const SemanticMap ignored(1, 4, kIgnoreLabel);
  EXPECT_FALSE(miou(pred, ignored, 2).has_value());
}

TEST(Miou, IgnorePredictionCountsAsMiss) {
  const SemanticMap gt(1, 2, {0, 0}), pred(1, 2, {0, kIgnoreLabel}, 2);
  EXPECT_NEAR(*miou(pred, gt, 2), 0.5, 1e-15);
}

TEST(Miou, MatchesSetOracle) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const SemanticMap gt = testing::random_labels(16, 16, 5, 60 + s, 0.1);
    const SemanticMap pred = testing::random_labels(16, 16, 5, 80 + s);
    EXPECT_NEAR(*miou(pred, gt, 5), *oracle::miou(pred, gt, 5), 1e-12);
  }
}

TEST(ConfusionMatrix, Counts) {
  ConfusionMatrix cm(3);
  cm.add(SemanticMap(1, 4, {0, 1, 2, 2}), SemanticMap(1, 4, {0, 2, 2, kIgnoreLabel}, 3));
  EXPECT_EQ(cm.total(), 3u);
  EXPECT_EQ(cm.count(2, 1), 1u);
  EXPECT_EQ(cm.count(2, 2), 1u);
  EXPECT_NEAR(*cm.iou(2), 0.5, 1e-15);
  EXPECT_FALSE(ConfusionMatrix(3).miou().has_value());
}

TEST(Canny, ConstantImageHasNoEdges) {
  for (double v : {0.0, 0.4, 1.0}) {
    const Planes e = canny(uniform(v, 24));
    for (double x : e.data()) EXPECT_EQ(x, 0.0);
    const Planes s = edge_map(uniform(v, 24), EdgeMode::training_soft);
    for (double x : s.data()) EXPECT_NEAR(x, 0.0, 1e-12);
  }
}

TEST(Canny, StepEdgeAgreesWithOpenCv) {
  const int n = 32;
  const Planes e = canny(step_image(n));
  cv::Mat gray(n, n, CV_8UC1, cv::Scalar(0));
  gray(cv::Rect(n / 2, 0, n / 2, n)).setTo(255);
  cv::Mat ref;
  cv::Canny(gray, ref, 50, 150);
  std::set<int> ours_cols, ref_cols;
  for (int y = 2; y < n - 2; ++y) {
    for (int x = 0; x < n; ++x) {
      if (e.at(0, y, x) != 0.0) ours_cols.insert(x);
      if (ref.at<unsigned char>(y, x) != 0) ref_cols.insert(x);
    }
  }
  ASSERT_FALSE(ours_cols.empty());
  for (int x : ours_cols) EXPECT_TRUE(x == n / 2 - 1 || x == n / 2) << x;
  for (int x : ref_cols) EXPECT_TRUE(x == n / 2 - 1 || x == n / 2) << x;
  // Every interior row carries exactly one edge pixel in both detectors.
  for (int y = 2; y < n - 2; ++y) {
    int ours = 0, theirs = 0;
    for (int x = 0; x < n; ++x) {
      ours += e.at(0, y, x) != 0.0;
      theirs += ref.at<unsigned char>(y, x) != 0;
    }
    EXPECT_EQ(ours, 1);
    EXPECT_EQ(theirs, 1);
  }
}

TEST(SoftEdges, InvariantToOffsetAndPeaksAtStep) {
  const Planes a = random_planes(3, 16, 16, 70, 0.0, 0.5);
  Planes b = a;
  for (double& v : b.data()) v += 0.3;
  const Planes ea = soft_edges(a), eb = soft_edges(b);
  for (std::size_t i = 0; i < ea.size(); ++i) EXPECT_NEAR(ea.data()[i], eb.data()[i], 1e-9);

  const Planes s = soft_edges(step_image(16).planes());
  EXPECT_GT(s.at(0, 8, 8), s.at(0, 8, 2));
  EXPECT_GT(s.at(0, 8, 7), s.at(0, 8, 13));
}

TEST(SoftEdges, BackwardIsVectorJacobianProduct) {
  const Planes x = random_planes(3, 16, 16, 71);
  const Planes up = random_planes(3, 16, 16, 72, -1.0, 1.0);
  const Planes g = soft_edges_backward(x, up);
  const auto f = [&](const Planes& p) {
    const Planes e = soft_edges(p);
    double s = 0;
    for (std::size_t i = 0; i < e.size(); ++i) s += e.data()[i] * up.data()[i];
    return s;
  };
  std::vector<std::size_t> coords;
  for (std::size_t i = 3; i < x.size(); i += 29) coords.push_back(i);
  const auto num = oracle::numeric_gradient(f, x, coords, 1e-5);
  for (std::size_t k = 0; k < coords.size(); ++k) {
    EXPECT_LT(oracle::relative_error(g.data()[coords[k]], num[k], 1e-4), 1e-4);
  }
}

TEST(EdgeDistance, NormProperties) {
  EXPECT_NEAR(edge_distance(Planes(1, 3, 3, 1.0), Planes(1, 3, 3, 0.0)), 3.0, 1e-15);
  const Planes a = random_planes(1, 8, 8, 1);
  EXPECT_EQ(edge_distance(a, a), 0.0);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Planes x = random_planes(1, 8, 8, 100 + s), y = random_planes(1, 8, 8, 200 + s),
                 z = random_planes(1, 8, 8, 300 + s);
    EXPECT_LE(edge_distance(x, z), edge_distance(x, y) + edge_distance(y, z) + 1e-12);
    EXPECT_NEAR(edge_distance(x, y), oracle::frobenius_distance(x, y), 1e-12);
  }
}

TEST(ConfidenceInterval, Examples) {
  const std::vector<double> constant{0.4, 0.4, 0.4};
  EXPECT_EQ(confidence_interval(constant).half_width, 0.0);
  const std::vector<double> s{0.0, 1.0};
  const Interval ci = confidence_interval(s, 0.95);
  EXPECT_NEAR(ci.mean, 0.5, 1e-15);
  EXPECT_NEAR(ci.half_width, 1.959963984540054 * std::sqrt(0.5) / std::sqrt(2.0), 1e-9);
  EXPECT_GE(confidence_interval(s, 0.99).half_width, ci.half_width);
  const std::vector<double> one{1.0};
  EXPECT_THROW(confidence_interval(one), Error);
  EXPECT_THROW(confidence_interval(s, 1.0), Error);
}

TEST(Spearman, RanksWithTies) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> up{10, 20, 30, 40, 50}, down{5, 4, 3, 2, 1};
  EXPECT_NEAR(spearman_correlation(x, up), 1.0, 1e-12);
  EXPECT_NEAR(spearman_correlation(x, down), -1.0, 1e-12);
  const std::vector<double> tied{1, 1, 2, 2, 3};
  EXPECT_GT(spearman_correlation(x, tied), 0.9);
}

}  // namespace
}  // namespace srrn
