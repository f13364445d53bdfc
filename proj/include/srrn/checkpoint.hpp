#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "srrn/autograd.hpp"
#include "srrn/model.hpp"

namespace srrn {

struct NamedArray {
  std::string name;
  ag::Tensor value;
};

/// Binary container: "SRRNCKPT", format version, model config JSON, step, named arrays.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  ModelConfig model;
  std::int64_t step = 0;
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
};

Checkpoint make_checkpoint(const Model& model, std::int64_t step, std::vector<NamedArray> extra = {});
/// Writes to a sibling temporary file, then renames over `path`.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies the checkpoint's parameters into `model`. Throws checkpoint_mismatch when
/// the architectures differ or a parameter is missing or misshapen.
void restore_parameters(Model& model, const Checkpoint& checkpoint);
/// Model built from the embedded config with the stored parameters.
Model load_model(const std::filesystem::path& path);

/// Same architecture; the initialization seed is not compared.
bool same_architecture(const ModelConfig& a, const ModelConfig& b);

}  // namespace srrn
