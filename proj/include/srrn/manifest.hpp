#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "srrn/core_data.hpp"

namespace srrn {

enum class Split { unassigned, train, val };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

/// One record of a manifest. Paths are relative to the manifest's directory.
struct RecordRef {
  std::string id;
  std::string mixed;
  std::string background;
  std::string reflection;
  std::string semantic;
  std::optional<double> alpha;
  DataSource source = DataSource::syn;
  Split split = Split::unassigned;
  /// Records produced from the same (B, R) pairing share a group id.
  std::optional<std::int64_t> group;
  std::string background_id;
  std::string reflection_id;

  friend bool operator==(const RecordRef&, const RecordRef&) = default;
};

struct DatasetManifest {
  static constexpr int kSchemaVersion = 1;

  std::vector<RecordRef> records;
  std::uint64_t seed = 0;
  int class_count = kClassCount;
  /// Directory the record paths resolve against; not serialized.
  std::filesystem::path root;

  std::size_t count(Split s) const;
};

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
/// Sets `root` to the manifest's parent directory.
DatasetManifest load_manifest(const std::filesystem::path& path);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);

Quadruple load_quadruple(const DatasetManifest& manifest, const RecordRef& record);

/// Writes the four arrays under `root` using the paths named in `record`.
void store_quadruple(const Quadruple& q, const std::filesystem::path& root, const RecordRef& record);

/// File existence/decoding of every record plus train/val disjointness and coverage
/// (coverage is only required once any record has been assigned a split).
ValidationReport validate_manifest(const DatasetManifest& manifest, bool decode_files = true);

/// Marks round(train_fraction * N) records as train and the rest val.
/// A pure function of (manifest, fraction, seed).
DatasetManifest split_dataset(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed);

}  // namespace srrn
