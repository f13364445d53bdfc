#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "srrn/core_data.hpp"
#include "srrn/manifest.hpp"

namespace srrn {

/// I = (1 - alpha) B + alpha R, clamped to [0, 1].
ImageTensor blend(const ImageTensor& background, const ImageTensor& reflection, double alpha);

/// R = I - B, clamped to [0, 1]. Used to recover reflection layers of real pairs.
ImageTensor derive_reflection(const ImageTensor& mixed, const ImageTensor& background);

struct CropOffset {
  int y = 0;
  int x = 0;
  friend bool operator==(const CropOffset&, const CropOffset&) = default;
};

/// Offset drawn uniformly over the valid positions of a size x size window.
CropOffset crop_offset(int height, int width, int size, std::uint64_t seed);

ImageTensor crop(const ImageTensor& image, CropOffset offset, int size);
SemanticMap crop(const SemanticMap& map, CropOffset offset, int size);

struct CroppedPair {
  ImageTensor image;
  std::optional<SemanticMap> label;
  CropOffset offset;
};

/// Crops the image and (if present) its label with the same seeded offset.
CroppedPair random_crop(const ImageTensor& image, const std::optional<SemanticMap>& label, int size,
                        std::uint64_t seed);

struct LabeledImage {
  std::string id;
  ImageTensor image;
  SemanticMap label;
};

struct SourceImage {
  std::string id;
  ImageTensor image;
};

/// How each record's alpha is chosen.
struct AlphaSampler {
  enum class Kind { fixed, uniform };
  Kind kind = Kind::uniform;
  double lo = 0.1;
  double hi = 0.9;

  static AlphaSampler fixed(double a) { return {Kind::fixed, a, a}; }
  static AlphaSampler uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }

  double sample(std::uint64_t seed) const;
};

struct SynthesisOptions {
  int crop_size = 256;
  std::uint64_t seed = 0;
  /// Output directory; images are written under <out_dir>/{mixed,background,reflection,semantic}.
  std::filesystem::path out_dir;
  std::string manifest_name = "manifest.json";
  int class_count = kClassCount;
};

/// One synthetic record, in memory. Randomness is a function of (seed, index) only.
Quadruple synthesize_record(const std::vector<LabeledImage>& backgrounds, const std::vector<SourceImage>& reflections,
                            const AlphaSampler& alphas, int crop_size, std::uint64_t seed, std::size_t index,
                            RecordRef* ref = nullptr);

/// Writes `count` quadruples plus a manifest under options.out_dir and returns the manifest.
DatasetManifest synthesize_dataset(const std::vector<LabeledImage>& backgrounds,
                                   const std::vector<SourceImage>& reflections, std::size_t count,
                                   const AlphaSampler& alphas, const SynthesisOptions& options);

/// For each of `pairs` (B, R) pairings, one record per alpha sharing the same crops.
DatasetManifest alpha_sweep(const std::vector<LabeledImage>& backgrounds, const std::vector<SourceImage>& reflections,
                            std::size_t pairs, const std::vector<double>& alphas, const SynthesisOptions& options);

/// "lo:hi:step" inclusive grid, e.g. "0.1:0.9:0.1" -> 0.1, 0.2, ..., 0.9.
std::vector<double> parse_alpha_grid(const std::string& spec);

/// Source directory loaders. Label files share the image's stem.
std::vector<LabeledImage> load_labeled_images(const std::filesystem::path& image_dir,
                                              const std::filesystem::path& label_dir, int class_count = kClassCount);
std::vector<SourceImage> load_source_images(const std::filesystem::path& dir);

}  // namespace srrn
