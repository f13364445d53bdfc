#include "srrn/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "srrn/error.hpp"

namespace srrn {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::file_not_found: return "file_not_found";
    case ErrorCode::decode_failed: return "decode_failed";
    case ErrorCode::channel_mismatch: return "channel_mismatch";
    case ErrorCode::invalid_label: return "invalid_label";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::invalid_config: return "invalid_config";
    case ErrorCode::empty_input: return "empty_input";
    case ErrorCode::io_failure: return "io_failure";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::checkpoint_mismatch: return "checkpoint_mismatch";
  }
  return "unknown";
}

Planes::Planes(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 0 || height < 0 || width < 0) {
    fail(ErrorCode::invalid_argument, "negative plane dimensions");
  }
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

std::span<double> Planes::plane(int c) {
  return std::span<double>(data_).subspan(static_cast<std::size_t>(c) * plane_size(), plane_size());
}

std::span<const double> Planes::plane(int c) const {
  return std::span<const double>(data_).subspan(static_cast<std::size_t>(c) * plane_size(), plane_size());
}

ImageTensor::ImageTensor(int height, int width, double fill) {
  if (height < 1 || width < 1) {
    fail(ErrorCode::invalid_argument, fmt::format("image dimensions must be >= 1, got {}x{}", height, width));
  }
  if (!std::isfinite(fill)) fail(ErrorCode::non_finite, "non-finite image fill value");
  values_ = Planes(kChannels, height, width, std::clamp(fill, 0.0, 1.0));
}

ImageTensor::ImageTensor(Planes values) : values_(std::move(values)) {
  if (values_.channels() != kChannels) {
    fail(ErrorCode::channel_mismatch, fmt::format("image needs 3 channels, got {}", values_.channels()));
  }
  if (values_.height() < 1 || values_.width() < 1) {
    fail(ErrorCode::invalid_argument, "image dimensions must be >= 1");
  }
  for (double& v : values_.data()) {
    if (!std::isfinite(v)) fail(ErrorCode::non_finite, "non-finite image value");
    v = std::clamp(v, 0.0, 1.0);
  }
}

void ImageTensor::set(int c, int y, int x, double v) {
  if (!std::isfinite(v)) fail(ErrorCode::non_finite, "non-finite image value");
  values_.at(c, y, x) = std::clamp(v, 0.0, 1.0);
}

void check_label(std::uint8_t label, int class_count, int y, int x) {
  if (label != kIgnoreLabel && label >= class_count) {
    fail(ErrorCode::invalid_label, fmt::format("invalid class index {} at (row {}, col {})", static_cast<int>(label), y, x));
  }
}

SemanticMap::SemanticMap(int height, int width, std::uint8_t fill)
    : height_(height), width_(width), labels_(static_cast<std::size_t>(height) * width, fill) {
  if (height < 1 || width < 1) fail(ErrorCode::invalid_argument, "semantic map dimensions must be >= 1");
  check_label(fill, 256, 0, 0);
}

SemanticMap::SemanticMap(int height, int width, std::vector<std::uint8_t> labels, int class_count)
    : height_(height), width_(width), labels_(std::move(labels)) {
  if (height < 1 || width < 1) fail(ErrorCode::invalid_argument, "semantic map dimensions must be >= 1");
  if (labels_.size() != static_cast<std::size_t>(height) * width) {
    fail(ErrorCode::dimension_mismatch, "label buffer does not match map dimensions");
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) check_label(at(y, x), class_count, y, x);
  }
}

void SemanticMap::set(int y, int x, std::uint8_t label, int class_count) {
  check_label(label, class_count, y, x);
  labels_[static_cast<std::size_t>(y) * width_ + x] = label;
}

std::size_t SemanticMap::scored_pixels() const noexcept {
  return static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(),
                                                [](std::uint8_t l) { return l != kIgnoreLabel; }));
}

SemanticLogits::SemanticLogits(Planes scores) : scores_(std::move(scores)) {
  if (scores_.channels() < 1) fail(ErrorCode::invalid_argument, "logits need at least one class");
  for (double v : scores_.data()) {
    if (!std::isfinite(v)) fail(ErrorCode::non_finite, "non-finite logit");
  }
}

Planes SemanticLogits::probabilities() const {
  Planes p(classes(), height(), width());
  const std::size_t n = scores_.plane_size();
  const auto src = scores_.data();
  auto dst = p.data();
  for (std::size_t i = 0; i < n; ++i) {
    double peak = src[i];
    for (int k = 1; k < classes(); ++k) peak = std::max(peak, src[k * n + i]);
    double total = 0.0;
    for (int k = 0; k < classes(); ++k) {
      const double e = std::exp(src[k * n + i] - peak);
      dst[k * n + i] = e;
      total += e;
    }
    for (int k = 0; k < classes(); ++k) dst[k * n + i] /= total;
  }
  return p;
}

SemanticMap SemanticLogits::argmax() const {
  SemanticMap out(height(), width());
  const std::size_t n = scores_.plane_size();
  const auto src = scores_.data();
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width() + x;
      int best = 0;
      for (int k = 1; k < classes(); ++k) {
        if (src[k * n + i] > src[best * n + i]) best = k;
      }
      out.set(y, x, static_cast<std::uint8_t>(best), classes());
    }
  }
  return out;
}

std::string_view to_string(DataSource s) {
  switch (s) {
    case DataSource::real: return "real";
    case DataSource::ben: return "ben";
    case DataSource::syn: return "syn";
  }
  return "syn";
}

DataSource parse_data_source(std::string_view s) {
  if (s == "real") return DataSource::real;
  if (s == "ben") return DataSource::ben;
  if (s == "syn") return DataSource::syn;
  fail(ErrorCode::invalid_argument, fmt::format("unknown data source '{}'", s));
}

ValidationReport validate_quadruple(const Quadruple& q, double blend_tolerance) {
  ValidationReport report;
  const auto dims = [](int h, int w) { return fmt::format("{}x{}", h, w); };
  const int h = q.mixed.height();
  const int w = q.mixed.width();
  bool dims_ok = true;
  const auto check_dims = [&](std::string_view name, int oh, int ow) {
    if (oh != h || ow != w) {
      dims_ok = false;
      report.push_back({IssueKind::dimension_mismatch,
                        fmt::format("dimension mismatch: {} is {} but mixed is {}", name, dims(oh, ow), dims(h, w))});
    }
  };
  check_dims("background", q.background.height(), q.background.width());
  check_dims("reflection", q.reflection.height(), q.reflection.width());
  check_dims("semantic", q.semantic.height(), q.semantic.width());

  if (q.source == DataSource::syn && !q.alpha) {
    report.push_back({IssueKind::missing_alpha, "synthetic record has no alpha"});
  }
  if (q.alpha && !(*q.alpha >= 0.0 && *q.alpha <= 1.0)) {
    report.push_back({IssueKind::alpha_out_of_range, fmt::format("alpha {} outside [0, 1]", *q.alpha)});
  }
  if (dims_ok && q.source == DataSource::syn && q.alpha && *q.alpha >= 0.0 && *q.alpha <= 1.0) {
    const double a = *q.alpha;
    double worst = 0.0;
    int wc = 0, wy = 0, wx = 0;
    for (int c = 0; c < ImageTensor::kChannels; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double expected = (1.0 - a) * q.background.at(c, y, x) + a * q.reflection.at(c, y, x);
          const double r = std::abs(q.mixed.at(c, y, x) - std::clamp(expected, 0.0, 1.0));
          if (r > worst) {
            worst = r;
            wc = c, wy = y, wx = x;
          }
        }
      }
    }
    // Small slack so exactly-at-tolerance quantization does not trip on rounding.
    if (worst > blend_tolerance + 1e-12) {
      report.push_back({IssueKind::blend_residual,
                        fmt::format("blend residual exceeds tolerance: {:.6g} > {:.6g} at (channel {}, row {}, col {})",
                                    worst, blend_tolerance, wc, wy, wx)});
    }
  }
  return report;
}

}  // namespace srrn
