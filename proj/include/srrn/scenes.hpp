#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "srrn/datagen.hpp"

namespace srrn {

/// Procedural stand-ins for labeled photographs. Each object class is drawn
/// with its own palette color so the label is recoverable from appearance;
/// reflection sources are smooth color fields with random blobs.
struct SceneOptions {
  int size = 48;
  int class_count = kClassCount;
  int max_objects = 4;
  std::uint64_t seed = 0;
};

/// Palette color of a class (RGB in [0, 1]); hues are spread over the object classes.
std::array<double, 3> class_color(int label, int class_count = kClassCount);

LabeledImage make_background_scene(const SceneOptions& options, std::size_t index);
SourceImage make_reflection_scene(const SceneOptions& options, std::size_t index);

std::vector<LabeledImage> make_background_scenes(const SceneOptions& options, std::size_t count);
std::vector<SourceImage> make_reflection_scenes(const SceneOptions& options, std::size_t count);

/// Writes <dir>/backgrounds/*.png, <dir>/labels/*.png and <dir>/reflections/*.png.
void write_scene_sources(const std::filesystem::path& dir, const SceneOptions& options, std::size_t backgrounds,
                         std::size_t reflections);

}  // namespace srrn
