#pragma once

#include <filesystem>

#include "srrn/core_data.hpp"

namespace srrn {

/// Reads an 8-bit RGB raster; values are scaled by 1/255.
/// Errors: file_not_found, decode_failed, channel_mismatch.
ImageTensor load_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB raster, quantizing with round(v * 255). Use a lossless
/// extension (.png) for ground-truth layers.
void save_image(const ImageTensor& image, const std::filesystem::path& path);

/// Reads an 8-bit single-channel label raster. Values outside {0..20, 255}
/// raise invalid_label naming the value and its position.
SemanticMap load_semantic_map(const std::filesystem::path& path, int class_count = kClassCount);

void save_semantic_map(const SemanticMap& map, const std::filesystem::path& path);

/// round(v * 255) / 255, the value an image pixel takes after an 8-bit round trip.
double quantize8(double v);
ImageTensor quantize8(const ImageTensor& image);

}  // namespace srrn
