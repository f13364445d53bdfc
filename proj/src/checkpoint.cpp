#include "srrn/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <system_error>

#include <fmt/format.h>

#include "srrn/error.hpp"
#include "srrn/run_config.hpp"

namespace srrn {

namespace {

constexpr std::array<char, 8> kMagic{'S', 'R', 'R', 'N', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint64_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string source) : in_(in), source_(std::move(source)) {}
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    check();
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (1u << 30)) truncated();
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  void doubles(std::span<double> out) {
    in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size_bytes()));
    check();
  }

 private:
  void check() {
    if (!in_) truncated();
  }
  [[noreturn]] void truncated() {
    fail(ErrorCode::decode_failed, fmt::format("checkpoint '{}' is truncated or corrupt", source_));
  }
  std::ifstream& in_;
  std::string source_;
};

}  // namespace

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const NamedArray& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

bool same_architecture(const ModelConfig& a, const ModelConfig& b) {
  ModelConfig x = a;
  x.seed = b.seed;
  return x == b;
}

Checkpoint make_checkpoint(const Model& model, std::int64_t step, std::vector<NamedArray> extra) {
  Checkpoint c;
  c.model = model.config();
  c.step = step;
  for (const Parameter& p : model.parameters()) c.arrays.push_back({p.name, p.var->value});
  for (NamedArray& a : extra) c.arrays.push_back(std::move(a));
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io_failure, fmt::format("cannot write checkpoint '{}'", tmp.string()));
    Writer w(out);
    out.write(kMagic.data(), kMagic.size());
    w.pod(Checkpoint::kVersion);
    w.str(model_config_to_json(checkpoint.model));
    w.pod(checkpoint.step);
    w.pod(static_cast<std::uint64_t>(checkpoint.arrays.size()));
    for (const NamedArray& a : checkpoint.arrays) {
      w.str(a.name);
      const ag::Shape& s = a.value.shape();
      for (std::int32_t d : {s.n, s.c, s.h, s.w}) w.pod(d);
      out.write(reinterpret_cast<const char*>(a.value.ptr()), static_cast<std::streamsize>(a.value.size() * sizeof(double)));
    }
    out.flush();
    if (!out) fail(ErrorCode::io_failure, fmt::format("failed writing checkpoint '{}'", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::io_failure, fmt::format("cannot move checkpoint into '{}': {}", path.string(), ec.message()));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    fail(ErrorCode::file_not_found, fmt::format("checkpoint '{}' not found", path.string()));
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_failure, fmt::format("cannot open checkpoint '{}'", path.string()));
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) fail(ErrorCode::decode_failed, fmt::format("'{}' is not a checkpoint", path.string()));
  Reader r(in, path.string());
  const auto version = r.pod<std::uint32_t>();
  if (version != Checkpoint::kVersion) {
    fail(ErrorCode::decode_failed, fmt::format("checkpoint version {} is not supported", version));
  }
  Checkpoint c;
  c.model = model_config_from_json(r.str());
  c.step = r.pod<std::int64_t>();
  const auto count = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.str();
    ag::Shape s;
    s.n = r.pod<std::int32_t>();
    s.c = r.pod<std::int32_t>();
    s.h = r.pod<std::int32_t>();
    s.w = r.pod<std::int32_t>();
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0 || s.size() > (std::size_t{1} << 28)) {
      fail(ErrorCode::decode_failed, fmt::format("checkpoint array '{}' has a corrupt shape", a.name));
    }
    a.value = ag::Tensor(s);
    r.doubles(a.value.data());
    c.arrays.push_back(std::move(a));
  }
  return c;
}

void restore_parameters(Model& model, const Checkpoint& checkpoint) {
  if (!same_architecture(model.config(), checkpoint.model)) {
    fail(ErrorCode::checkpoint_mismatch, "checkpoint was written for a different model configuration");
  }
  for (Parameter& p : model.parameters()) {
    const NamedArray* a = checkpoint.find(p.name);
    if (!a) fail(ErrorCode::checkpoint_mismatch, fmt::format("checkpoint lacks parameter '{}'", p.name));
    if (!(a->value.shape() == p.var->value.shape())) {
      fail(ErrorCode::checkpoint_mismatch, fmt::format("parameter '{}' has shape {} in the checkpoint, expected {}",
                                                       p.name, ag::to_string(a->value.shape()),
                                                       ag::to_string(p.var->value.shape())));
    }
    p.var->value = a->value;
  }
}

Model load_model(const std::filesystem::path& path) {
  const Checkpoint c = read_checkpoint(path);
  Model model(c.model);
  restore_parameters(model, c);
  return model;
}

}  // namespace srrn
