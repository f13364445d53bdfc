#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace srrn {

inline constexpr int kClassCount = 21;
inline constexpr std::uint8_t kIgnoreLabel = 255;

/// Dense channel-major (C x H x W) array of doubles. Carrier for images,
/// edge maps, logits and gradients.
class Planes {
 public:
  Planes() = default;
  Planes(int channels, int height, int width, double fill = 0.0);

  int channels() const noexcept { return channels_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }

  double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> plane(int c);
  std::span<const double> plane(int c) const;

  bool same_shape(const Planes& other) const noexcept {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Planes&, const Planes&) = default;

 private:
  std::size_t index(int c, int y, int x) const noexcept {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// RGB image with every value finite and in [0, 1].
class ImageTensor {
 public:
  static constexpr int kChannels = 3;

  ImageTensor() = default;
  ImageTensor(int height, int width, double fill = 0.0);
  /// Values are clamped into [0, 1]; non-finite values and non-RGB planes are rejected.
  explicit ImageTensor(Planes values);

  int height() const noexcept { return values_.height(); }
  int width() const noexcept { return values_.width(); }
  int channels() const noexcept { return kChannels; }
  bool empty() const noexcept { return values_.size() == 0; }

  double at(int c, int y, int x) const { return values_.at(c, y, x); }
  void set(int c, int y, int x, double v);

  const Planes& planes() const noexcept { return values_; }
  std::span<const double> data() const noexcept { return values_.data(); }

  bool same_size(const ImageTensor& other) const noexcept {
    return height() == other.height() && width() == other.width();
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  Planes values_;
};

/// Per-pixel class index in [0, class_count) or kIgnoreLabel.
class SemanticMap {
 public:
  SemanticMap() = default;
  SemanticMap(int height, int width, std::uint8_t fill = 0);
  /// Throws invalid_label naming the first offending value and position.
  SemanticMap(int height, int width, std::vector<std::uint8_t> labels, int class_count = kClassCount);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }

  std::uint8_t at(int y, int x) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int y, int x, std::uint8_t label, int class_count = kClassCount);

  std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  std::size_t scored_pixels() const noexcept;

  friend bool operator==(const SemanticMap&, const SemanticMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> labels_;
};

void check_label(std::uint8_t label, int class_count, int y, int x);

/// Unnormalized per-class scores.
class SemanticLogits {
 public:
  SemanticLogits() = default;
  explicit SemanticLogits(Planes scores);

  int height() const noexcept { return scores_.height(); }
  int width() const noexcept { return scores_.width(); }
  int classes() const noexcept { return scores_.channels(); }
  const Planes& scores() const noexcept { return scores_; }

  /// Softmax over classes at every pixel.
  Planes probabilities() const;
  SemanticMap argmax() const;

 private:
  Planes scores_;
};

enum class DataSource { real, ben, syn };
std::string_view to_string(DataSource s);
DataSource parse_data_source(std::string_view s);

struct Quadruple {
  std::string id;
  ImageTensor mixed;
  ImageTensor background;
  ImageTensor reflection;
  SemanticMap semantic;
  std::optional<double> alpha;
  DataSource source = DataSource::syn;
};

enum class IssueKind { dimension_mismatch, blend_residual, alpha_out_of_range, missing_alpha, invalid_file, split_coverage };

struct ValidationIssue {
  IssueKind kind;
  std::string message;
};

using ValidationReport = std::vector<ValidationIssue>;

/// Quantization tolerance for records whose arrays went through 8-bit storage.
inline constexpr double kBlendTolerance = 1.0 / 255.0;

/// Every violated Quadruple invariant; empty iff the record is consistent.
ValidationReport validate_quadruple(const Quadruple& q, double blend_tolerance = kBlendTolerance);

}  // namespace srrn
