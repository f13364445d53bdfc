#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "srrn/core_data.hpp"
#include "srrn/datagen.hpp"
#include "srrn/manifest.hpp"
#include "srrn/model.hpp"
#include "srrn/trainer.hpp"

namespace srrn::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

 private:
  std::filesystem::path path_;
};

Planes random_planes(int channels, int height, int width, std::uint64_t seed, double lo = 0.0, double hi = 1.0);
ImageTensor random_image(int height, int width, std::uint64_t seed);
SemanticMap random_labels(int height, int width, int classes, std::uint64_t seed, double ignore_share = 0.0);
std::string read_file(const std::filesystem::path& path);

/// Small network used by the training tests: three encoder stages (stride 4),
/// two decoder stages, guidance fused at full resolution.
ModelConfig toy_model_config(int classes, std::uint64_t seed = 0);

/// Optimizer settings validated on the toy scenes (see README).
TrainConfig toy_train_config(const ModelConfig& model, std::int64_t steps, std::uint64_t seed = 0);

struct SceneDataset {
  int classes = 6;
  int scene_size = 48;
  int crop = 32;
  std::size_t sources = 60;
  std::size_t records = 200;
  AlphaSampler alphas = AlphaSampler::uniform(0.1, 0.5);
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

/// Procedural sources blended into a split manifest under `dir`.
DatasetManifest make_scene_dataset(const std::filesystem::path& dir, const SceneDataset& spec);

/// `pairs` x alphas sweep built from sources disjoint from make_scene_dataset's (different seed stream).
DatasetManifest make_scene_sweep(const std::filesystem::path& dir, const SceneDataset& spec, std::size_t pairs,
                                 const std::vector<double>& alphas);

}  // namespace srrn::testing
