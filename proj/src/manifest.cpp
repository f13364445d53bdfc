#include "srrn/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "srrn/error.hpp"
#include "srrn/image_io.hpp"
#include "srrn/random.hpp"

namespace srrn {

using nlohmann::json;

std::string_view to_string(Split s) {
  switch (s) {
    case Split::unassigned: return "unassigned";
    case Split::train: return "train";
    case Split::val: return "val";
  }
  return "unassigned";
}

Split parse_split(std::string_view s) {
  if (s == "unassigned") return Split::unassigned;
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  fail(ErrorCode::invalid_argument, fmt::format("unknown split '{}'", s));
}

std::size_t DatasetManifest::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [s](const RecordRef& r) { return r.split == s; }));
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  json records = json::array();
  for (const RecordRef& r : manifest.records) {
    json j;
    j["id"] = r.id;
    j["mixed"] = r.mixed;
    j["background"] = r.background;
    j["reflection"] = r.reflection;
    j["semantic"] = r.semantic;
    j["alpha"] = r.alpha ? json(*r.alpha) : json(nullptr);
    j["source"] = std::string(to_string(r.source));
    j["split"] = std::string(to_string(r.split));
    j["group"] = r.group ? json(*r.group) : json(nullptr);
    j["background_id"] = r.background_id;
    j["reflection_id"] = r.reflection_id;
    records.push_back(std::move(j));
  }
  json doc;
  doc["schema_version"] = DatasetManifest::kSchemaVersion;
  doc["seed"] = manifest.seed;
  doc["class_count"] = manifest.class_count;
  doc["records"] = std::move(records);
  return doc.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::decode_failed, fmt::format("manifest is not valid JSON: {}", e.what()));
  }
  try {
    const int version = doc.at("schema_version").get<int>();
    if (version != DatasetManifest::kSchemaVersion) {
      fail(ErrorCode::decode_failed, fmt::format("unsupported manifest schema_version {}", version));
    }
    DatasetManifest m;
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.class_count = doc.at("class_count").get<int>();
    for (const json& j : doc.at("records")) {
      RecordRef r;
      r.id = j.at("id").get<std::string>();
      r.mixed = j.at("mixed").get<std::string>();
      r.background = j.at("background").get<std::string>();
      r.reflection = j.at("reflection").get<std::string>();
      r.semantic = j.at("semantic").get<std::string>();
      if (!j.at("alpha").is_null()) r.alpha = j.at("alpha").get<double>();
      r.source = parse_data_source(j.at("source").get<std::string>());
      r.split = parse_split(j.at("split").get<std::string>());
      if (j.contains("group") && !j.at("group").is_null()) r.group = j.at("group").get<std::int64_t>();
      r.background_id = j.value("background_id", std::string{});
      r.reflection_id = j.value("reflection_id", std::string{});
      m.records.push_back(std::move(r));
    }
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::decode_failed, fmt::format("malformed manifest: {}", e.what()));
  }
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_failure, fmt::format("cannot write manifest {}", path.string()));
  out << manifest_to_json(manifest);
  if (!out) fail(ErrorCode::io_failure, fmt::format("cannot write manifest {}", path.string()));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::file_not_found, fmt::format("no such manifest: {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  DatasetManifest m = manifest_from_json(buffer.str());
  m.root = path.parent_path();
  return m;
}

Quadruple load_quadruple(const DatasetManifest& manifest, const RecordRef& record) {
  Quadruple q;
  q.id = record.id;
  q.mixed = load_image(manifest.root / record.mixed);
  q.background = load_image(manifest.root / record.background);
  q.reflection = load_image(manifest.root / record.reflection);
  q.semantic = load_semantic_map(manifest.root / record.semantic, manifest.class_count);
  q.alpha = record.alpha;
  q.source = record.source;
  return q;
}

void store_quadruple(const Quadruple& q, const std::filesystem::path& root, const RecordRef& record) {
  save_image(q.mixed, root / record.mixed);
  save_image(q.background, root / record.background);
  save_image(q.reflection, root / record.reflection);
  save_semantic_map(q.semantic, root / record.semantic);
}

ValidationReport validate_manifest(const DatasetManifest& manifest, bool decode_files) {
  ValidationReport report;
  std::set<std::string> ids;
  for (const RecordRef& r : manifest.records) {
    if (!ids.insert(r.id).second) {
      report.push_back({IssueKind::invalid_file, fmt::format("duplicate record id '{}'", r.id)});
    }
    if (!decode_files) continue;
    try {
      const Quadruple q = load_quadruple(manifest, r);
      for (ValidationIssue& issue : validate_quadruple(q)) {
        issue.message = fmt::format("record {}: {}", r.id, issue.message);
        report.push_back(std::move(issue));
      }
    } catch (const Error& e) {
      report.push_back({IssueKind::invalid_file, fmt::format("record {}: {}", r.id, e.what())});
    }
  }
  const std::size_t unassigned = manifest.count(Split::unassigned);
  if (unassigned != 0 && unassigned != manifest.records.size()) {
    report.push_back({IssueKind::split_coverage,
                      fmt::format("{} records have no train/val assignment", unassigned)});
  }
  return report;
}

DatasetManifest split_dataset(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed) {
  if (manifest.records.empty()) fail(ErrorCode::empty_input, "cannot split an empty manifest");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    fail(ErrorCode::invalid_argument, fmt::format("train_fraction must be in (0, 1), got {}", train_fraction));
  }
  const std::size_t n = manifest.records.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0x5e11u}));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  DatasetManifest out = manifest;
  for (std::size_t i = 0; i < n; ++i) {
    out.records[order[i]].split = i < n_train ? Split::train : Split::val;
  }
  out.seed = seed;
  return out;
}

}  // namespace srrn
