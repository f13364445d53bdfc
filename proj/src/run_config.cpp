#include "srrn/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "srrn/error.hpp"

namespace srrn {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  fail(ErrorCode::invalid_config, fmt::format("config key '{}': {}", path, what));
}

// Reads one object, remembering which keys were consumed so leftovers can be reported.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) config_error(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void read(const std::string& key, double& out) {
    if (const json* v = get(key)) {
      if (!v->is_number()) config_error(key_path(key), "expected a number");
      out = v->get<double>();
    }
  }
  void read(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) config_error(key_path(key), "expected a boolean");
      out = v->get<bool>();
    }
  }
  template <typename Int>
    requires std::is_integral_v<Int>
  void read(const std::string& key, Int& out) {
    if (const json* v = get(key)) {
      if (!v->is_number_integer()) config_error(key_path(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned() || v->get<std::int64_t>() >= 0) {
          out = v->get<Int>();
          return;
        }
        config_error(key_path(key), "expected a non-negative integer");
      } else {
        out = v->get<Int>();
      }
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) config_error(key_path(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void read(const std::string& key, std::vector<int>& out) {
    if (const json* v = get(key)) {
      if (!v->is_array()) config_error(key_path(key), "expected an array of integers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number_integer()) config_error(fmt::format("{}[{}]", key_path(key), i), "expected an integer");
        out.push_back((*v)[i].get<int>());
      }
    }
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.contains(it.key())) config_error(key_path(it.key()), "unknown key");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

json model_to_json(const ModelConfig& m) {
  json blocks = json::array();
  for (const EncoderStage& e : m.encoder_blocks) blocks.push_back({{"width", e.width}, {"stride", e.stride}});
  return {{"encoder_blocks", blocks},
          {"aspp_rates", m.aspp_rates},
          {"aspp_width", m.aspp_width},
          {"semantic_width", m.semantic_width},
          {"class_count", m.class_count},
          {"decoder_widths", m.decoder_widths},
          {"skip_stage_ids", m.skip_stage_ids},
          {"variant", std::string(to_string(m.variant))},
          {"fusion_stage", m.fusion_stage},
          {"input_skip", m.input_skip},
          {"residual_background", m.residual_background},
          {"freeze_encoder", m.freeze_encoder}};
}

void read_model(Section& s, ModelConfig& m) {
  if (const json* blocks = s.get("encoder_blocks")) {
    const std::string base = s.key_path("encoder_blocks");
    if (!blocks->is_array()) config_error(base, "expected an array of {width, stride}");
    m.encoder_blocks.clear();
    for (std::size_t i = 0; i < blocks->size(); ++i) {
      Section b((*blocks)[i], fmt::format("{}[{}]", base, i));
      EncoderStage st;
      b.read("width", st.width);
      b.read("stride", st.stride);
      b.finish();
      m.encoder_blocks.push_back(st);
    }
  }
  s.read("aspp_rates", m.aspp_rates);
  s.read("aspp_width", m.aspp_width);
  s.read("semantic_width", m.semantic_width);
  s.read("class_count", m.class_count);
  s.read("decoder_widths", m.decoder_widths);
  s.read("skip_stage_ids", m.skip_stage_ids);
  std::string variant(to_string(m.variant));
  s.read("variant", variant);
  try {
    m.variant = parse_fusion_variant(variant);
  } catch (const Error& e) {
    config_error(s.key_path("variant"), e.what());
  }
  s.read("fusion_stage", m.fusion_stage);
  s.read("input_skip", m.input_skip);
  s.read("residual_background", m.residual_background);
  s.read("freeze_encoder", m.freeze_encoder);
}

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::invalid_config, fmt::format("{} is not valid JSON: {}", what, e.what()));
  }
}

}  // namespace

RunConfigFile parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  const json doc = parse_json(text, "run config");
  Section root(doc, "");
  int version = RunConfigFile::kSchemaVersion;
  root.read("schema_version", version);
  if (version != RunConfigFile::kSchemaVersion) {
    config_error("schema_version", fmt::format("unsupported version {}", version));
  }

  RunConfigFile out;
  TrainConfig& t = out.train;
  root.read("seed", t.seed);

  const json* dataset = root.get("dataset");
  if (!dataset) config_error("dataset.manifest", "missing required key");
  {
    Section d(*dataset, "dataset");
    std::string manifest;
    d.read("manifest", manifest);
    if (manifest.empty()) config_error("dataset.manifest", "missing required key");
    d.finish();
    std::filesystem::path p(manifest);
    t.manifest = p.is_relative() && !base_dir.empty() ? (base_dir / p).lexically_normal() : p;
  }

  if (const json* model = root.get("model")) {
    Section m(*model, "model");
    read_model(m, t.model);
    m.finish();
  }

  if (const json* loss = root.get("loss")) {
    Section l(*loss, "loss");
    LossWeights& w = t.weights;
    l.read("w1", w.w1);
    l.read("w1_1", w.w1_1);
    l.read("w1_2", w.w1_2);
    l.read("w1_3", w.w1_3);
    l.read("w2", w.w2);
    l.read("w3", w.w3);
    l.read("w4", w.w4);
    l.read("sigma_R", w.sigma_R);
    l.read("sigma_S", w.sigma_S);
    std::string mode(to_string(w.sigma_mode));
    l.read("sigma_mode", mode);
    try {
      w.sigma_mode = parse_sigma_mode(mode);
    } catch (const Error& e) {
      config_error("loss.sigma_mode", e.what());
    }
    l.finish();
  }

  if (const json* train = root.get("train")) {
    Section s(*train, "train");
    s.read("momentum", t.momentum);
    s.read("lr_init", t.lr_init);
    s.read("lr_decay_every", t.lr_decay_every);
    s.read("lr_floor", t.lr_floor);
    s.read("lr_decay_factor", t.lr_decay_factor);
    s.read("batch_size", t.batch_size);
    s.read("max_steps", t.max_steps);
    s.read("crop", t.crop);
    s.read("eval_every", t.eval_every);
    s.finish();
  }
  root.finish();

  t.model.seed = t.seed;
  try {
    t.validate();
  } catch (const Error& e) {
    fail(ErrorCode::invalid_config, e.what());
  }
  return out;
}

RunConfigFile load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::file_not_found, fmt::format("cannot open config '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

std::string run_config_to_json(const RunConfigFile& config) {
  const TrainConfig& t = config.train;
  const LossWeights& w = t.weights;
  json doc = {{"schema_version", RunConfigFile::kSchemaVersion},
              {"seed", t.seed},
              {"dataset", {{"manifest", t.manifest.generic_string()}}},
              {"model", model_to_json(t.model)},
              {"loss",
               {{"w1", w.w1},
                {"w1_1", w.w1_1},
                {"w1_2", w.w1_2},
                {"w1_3", w.w1_3},
                {"w2", w.w2},
                {"w3", w.w3},
                {"w4", w.w4},
                {"sigma_R", w.sigma_R},
                {"sigma_S", w.sigma_S},
                {"sigma_mode", std::string(to_string(w.sigma_mode))}}},
              {"train",
               {{"momentum", t.momentum},
                {"lr_init", t.lr_init},
                {"lr_decay_every", t.lr_decay_every},
                {"lr_floor", t.lr_floor},
                {"lr_decay_factor", t.lr_decay_factor},
                {"batch_size", t.batch_size},
                {"max_steps", t.max_steps},
                {"crop", t.crop},
                {"eval_every", t.eval_every}}}};
  return doc.dump(2) + "\n";
}

void echo_run_config(const RunConfigFile& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "resolved_config.json", std::ios::binary);
  if (!out) fail(ErrorCode::io_failure, fmt::format("cannot write into '{}'", dir.string()));
  out << run_config_to_json(config);
}

std::string model_config_to_json(const ModelConfig& config) {
  json doc = model_to_json(config);
  doc["seed"] = config.seed;
  return doc.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  const json doc = parse_json(text, "model config");
  Section s(doc, "model");
  ModelConfig m;
  read_model(s, m);
  s.read("seed", m.seed);
  s.finish();
  m.validate();
  return m;
}

}  // namespace srrn
