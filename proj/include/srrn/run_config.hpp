#pragma once

#include <filesystem>
#include <string>

#include "srrn/model.hpp"
#include "srrn/trainer.hpp"

namespace srrn {

/// On-disk run description. Layout:
///
///   { "schema_version": 1, "seed": 0,
///     "dataset": { "manifest": "data/manifest.json" },
///     "model":   { "encoder_blocks": [{"width": 16, "stride": 1}, ...], ... },
///     "loss":    { "w1": 1.0, ..., "sigma_mode": "fixed" },
///     "train":   { "momentum": 0.99, ..., "eval_every": 0 } }
///
/// Unknown keys are errors; absent keys take the TrainConfig defaults, except
/// dataset.manifest which is required.
struct RunConfigFile {
  static constexpr int kSchemaVersion = 1;
  TrainConfig train;
};

/// Relative manifest paths resolve against `base_dir`.
RunConfigFile parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfigFile load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfigFile& config);
/// Writes resolved_config.json into `dir`.
void echo_run_config(const RunConfigFile& config, const std::filesystem::path& dir);

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace srrn
