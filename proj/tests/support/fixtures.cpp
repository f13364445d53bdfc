#include "support/fixtures.hpp"

#include <fstream>
#include <sstream>
#include <unistd.h>

#include "srrn/random.hpp"
#include "srrn/scenes.hpp"

namespace srrn::testing {

TempDir::TempDir(const std::string& tag) {
  static int counter = 0;
  path_ = std::filesystem::temp_directory_path() /
          ("srrn_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

Planes random_planes(int channels, int height, int width, std::uint64_t seed, double lo, double hi) {
  Planes p(channels, height, width);
  Rng rng(seed);
  for (double& v : p.data()) v = rng.uniform(lo, hi);
  return p;
}

ImageTensor random_image(int height, int width, std::uint64_t seed) {
  return ImageTensor(random_planes(3, height, width, seed));
}

SemanticMap random_labels(int height, int width, int classes, std::uint64_t seed, double ignore_share) {
  SemanticMap m(height, width);
  Rng rng(seed);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const bool ignore = rng.uniform() < ignore_share;
      m.set(y, x, ignore ? kIgnoreLabel : static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(classes))),
            classes);
    }
  }
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModelConfig toy_model_config(int classes, std::uint64_t seed) {
  ModelConfig c;
  c.encoder_blocks = {{16, 1}, {32, 2}, {32, 2}};
  c.aspp_rates = {1, 2};
  c.aspp_width = 32;
  c.semantic_width = 16;
  c.class_count = classes;
  c.decoder_widths = {32, 16};
  c.skip_stage_ids = {0, 1};
  c.variant = FusionVariant::full_fusion;
  c.fusion_stage = 1;
  c.seed = seed;
  return c;
}

TrainConfig toy_train_config(const ModelConfig& model, std::int64_t steps, std::uint64_t seed) {
  TrainConfig t;
  t.model = model;
  t.model.seed = seed;
  t.weights.w4 = 1e-5;
  t.momentum = 0.9;
  t.lr_init = 0.005;
  t.batch_size = 2;
  t.max_steps = steps;
  t.crop = 32;
  t.seed = seed;
  return t;
}

namespace {

SceneOptions scene_options(const SceneDataset& spec, std::uint64_t stream) {
  SceneOptions o;
  o.size = spec.scene_size;
  o.class_count = spec.classes;
  o.seed = derive_seed(spec.seed, {stream});
  return o;
}

}  // namespace

DatasetManifest make_scene_dataset(const std::filesystem::path& dir, const SceneDataset& spec) {
  const SceneOptions o = scene_options(spec, 1);
  const auto bgs = make_background_scenes(o, spec.sources);
  const auto refls = make_reflection_scenes(o, spec.sources);
  SynthesisOptions s;
  s.crop_size = spec.crop;
  s.seed = derive_seed(spec.seed, {2});
  s.out_dir = dir;
  s.class_count = spec.classes;
  DatasetManifest m = synthesize_dataset(bgs, refls, spec.records, spec.alphas, s);
  m = split_dataset(m, spec.train_fraction, s.seed);
  m.root = dir;
  save_manifest(m, dir / s.manifest_name);
  return m;
}

DatasetManifest make_scene_sweep(const std::filesystem::path& dir, const SceneDataset& spec, std::size_t pairs,
                                 const std::vector<double>& alphas) {
  const SceneOptions o = scene_options(spec, 3);
  const auto bgs = make_background_scenes(o, spec.sources);
  const auto refls = make_reflection_scenes(o, spec.sources);
  SynthesisOptions s;
  s.crop_size = spec.crop;
  s.seed = derive_seed(spec.seed, {4});
  s.out_dir = dir;
  s.class_count = spec.classes;
  return alpha_sweep(bgs, refls, pairs, alphas, s);
}

}  // namespace srrn::testing
