#include "srrn/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "srrn/error.hpp"
#include "srrn/random.hpp"

namespace srrn {

std::string_view to_string(FusionVariant v) {
  switch (v) {
    case FusionVariant::basic_guidance: return "basic_guidance";
    case FusionVariant::shared_no_fusion: return "shared_no_fusion";
    case FusionVariant::full_fusion: return "full_fusion";
  }
  return "full_fusion";
}

FusionVariant parse_fusion_variant(std::string_view s) {
  if (s == "basic_guidance") return FusionVariant::basic_guidance;
  if (s == "shared_no_fusion") return FusionVariant::shared_no_fusion;
  if (s == "full_fusion") return FusionVariant::full_fusion;
  fail(ErrorCode::invalid_config, fmt::format("unknown fusion variant '{}'", s));
}

std::string_view to_string(ParamRole r) {
  switch (r) {
    case ParamRole::encoder: return "encoder";
    case ParamRole::semantic_encoder: return "semantic_encoder";
    case ParamRole::aspp: return "aspp";
    case ParamRole::semantic_aspp: return "semantic_aspp";
    case ParamRole::semantic_head: return "semantic_head";
    case ParamRole::decoder: return "decoder";
    case ParamRole::output_head: return "output_head";
  }
  return "unknown";
}

namespace {

int log2_exact(int v) {
  int l = 0;
  while ((1 << l) < v) ++l;
  return l;
}

constexpr double kLogitMargin = 1e-3;

// Output stride after decoder stage k.
int decoder_stride(int total_stride, int k) {
  const int steps = std::min(k + 1, log2_exact(total_stride));
  return total_stride >> steps;
}

}  // namespace

int ModelConfig::total_stride() const {
  int s = 1;
  for (const EncoderStage& e : encoder_blocks) s *= e.stride;
  return s;
}

int ModelConfig::stage_stride(int stage) const {
  int s = 1;
  for (int i = 0; i <= stage; ++i) s *= encoder_blocks[static_cast<std::size_t>(i)].stride;
  return s;
}

void ModelConfig::validate() const {
  const auto bad = [](const std::string& m) { fail(ErrorCode::invalid_config, m); };
  if (encoder_blocks.empty()) bad("encoder_blocks must not be empty");
  for (const EncoderStage& e : encoder_blocks) {
    if (e.width < 1) bad(fmt::format("encoder width must be >= 1, got {}", e.width));
    if (e.stride != 1 && e.stride != 2) bad(fmt::format("encoder stride must be 1 or 2, got {}", e.stride));
  }
  if (aspp_rates.empty()) bad("aspp_rates must not be empty");
  for (int r : aspp_rates) {
    if (r < 1) bad(fmt::format("aspp rate must be >= 1, got {}", r));
  }
  if (aspp_width < 1) bad("aspp_width must be >= 1");
  if (semantic_width < 1) bad("semantic_width must be >= 1");
  if (class_count < 2 || class_count > 255) bad("class_count must be in [2, 255)");
  if (decoder_widths.empty()) bad("decoder_widths must not be empty");
  for (int w : decoder_widths) {
    if (w < 1) bad(fmt::format("decoder width must be >= 1, got {}", w));
  }
  const int levels = log2_exact(total_stride());
  if (static_cast<int>(decoder_widths.size()) < levels) {
    bad(fmt::format("{} decoder stages cannot undo a total stride of {}", decoder_widths.size(), total_stride()));
  }
  for (int id : skip_stage_ids) {
    if (id < 0 || id >= static_cast<int>(encoder_blocks.size())) {
      bad(fmt::format("skip stage id {} does not name an encoder stage", id));
    }
    const int s = stage_stride(id);
    bool reachable = false;
    for (int k = 0; k < static_cast<int>(decoder_widths.size()); ++k) reachable |= decoder_stride(total_stride(), k) == s;
    if (!reachable) bad(fmt::format("skip stage {} (stride {}) matches no decoder resolution", id, s));
  }
  if (fusion_stage < 0 || fusion_stage >= static_cast<int>(decoder_widths.size())) {
    bad(fmt::format("fusion_stage {} out of range", fusion_stage));
  }
}

ag::Tensor to_batch(std::span<const ImageTensor> images) {
  if (images.empty()) fail(ErrorCode::empty_input, "empty batch");
  const int h = images.front().height(), w = images.front().width();
  ag::Tensor t(ag::Shape{static_cast<int>(images.size()), 3, h, w});
  std::size_t offset = 0;
  for (const ImageTensor& img : images) {
    if (img.height() != h || img.width() != w) fail(ErrorCode::dimension_mismatch, "batch images differ in size");
    std::copy(img.data().begin(), img.data().end(), t.data().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += img.data().size();
  }
  return t;
}

ag::Tensor to_batch(const ImageTensor& image) { return to_batch(std::span<const ImageTensor>(&image, 1)); }

Planes planes_from_batch(const ag::Tensor& t, int n) {
  const ag::Shape& s = t.shape();
  Planes p(s.c, s.h, s.w);
  const std::size_t len = p.size();
  std::copy(t.ptr() + static_cast<std::size_t>(n) * len, t.ptr() + static_cast<std::size_t>(n + 1) * len,
            p.data().begin());
  return p;
}

ImageTensor image_from_batch(const ag::Tensor& t, int n) { return ImageTensor(planes_from_batch(t, n)); }

SemanticLogits logits_from_batch(const ag::Tensor& t, int n) { return SemanticLogits(planes_from_batch(t, n)); }

ag::Tensor one_hot_guidance(const SemanticMap& map, int classes) {
  ag::Tensor t(ag::Shape{1, classes, map.height(), map.width()});
  bool any = false;
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const std::uint8_t l = map.at(y, x);
      if (l == kIgnoreLabel) continue;
      check_label(l, classes, y, x);
      t.at(0, l, y, x) = 1.0;
      any = true;
    }
  }
  if (!any) fail(ErrorCode::invalid_label, "no valid guidance labels");
  return t;
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const bool separate = config_.variant == FusionVariant::basic_guidance;

  encoder_ = build_encoder("encoder", ParamRole::encoder);
  const int deep = config_.encoder_blocks.back().width;
  aspp_ = build_aspp("aspp", ParamRole::aspp, deep);
  if (separate) {
    semantic_encoder_ = build_encoder("semantic_encoder", ParamRole::semantic_encoder);
    semantic_aspp_ = build_aspp("semantic_aspp", ParamRole::semantic_aspp, deep);
  }
  semantic_hidden_ = add_conv("semantic.hidden", ParamRole::semantic_head, config_.aspp_width, config_.semantic_width,
                              3, {1, 1, 1}, 1.0);
  semantic_logits_ = add_conv("semantic.logits", ParamRole::semantic_head, config_.semantic_width,
                              config_.class_count, 1, {}, 0.5);

  const bool fuse = config_.variant != FusionVariant::shared_no_fusion;
  const int levels = static_cast<int>(config_.decoder_widths.size());
  const int total = config_.total_stride();
  int channels = config_.aspp_width;
  int previous_stride = total;
  for (int k = 0; k < levels; ++k) {
    const int stride = decoder_stride(total, k);
    int in = channels;
    for (int id : config_.skip_stage_ids) {
      const int s = config_.stage_stride(id);
      if (s == stride && s != previous_stride) in += config_.encoder_blocks[static_cast<std::size_t>(id)].width;
      // Stride-preserving decoder stages at full resolution keep the first skip only.
      if (s == stride && k == 0 && s == total) in += config_.encoder_blocks[static_cast<std::size_t>(id)].width;
    }
    if (fuse && k == config_.fusion_stage) in += config_.class_count;
    if (config_.input_skip && k == levels - 1) in += 3;
    const int width = config_.decoder_widths[static_cast<std::size_t>(k)];
    DecoderStage d;
    d.a = add_conv(fmt::format("decoder.{}.a", k), ParamRole::decoder, in, width, 3, {1, 1, 1}, 1.0);
    d.b = add_conv(fmt::format("decoder.{}.b", k), ParamRole::decoder, width, width, 3, {1, 1, 1}, 1.0);
    decoder_.push_back(d);
    channels = width;
    previous_stride = stride;
  }
  background_head_ = add_conv("head.background", ParamRole::output_head, channels, 3, 3, {1, 1, 1},
                              config_.residual_background ? 0.1 : 0.5);
  reflection_head_ = add_conv("head.reflection", ParamRole::output_head, channels, 3, 3, {1, 1, 1}, 0.5);

  if (config_.freeze_encoder) {
    for (Parameter& p : params_) {
      if (p.role == ParamRole::encoder || p.role == ParamRole::semantic_encoder) {
        p.trainable = false;
        p.var->requires_grad = false;
      }
    }
  }
}

Model::Conv Model::add_conv(const std::string& name, ParamRole role, int in, int out, int kernel,
                            ag::Conv2dOptions options, double gain) {
  const int fan_in = in * kernel * kernel;
  const double std_dev = gain * std::sqrt(2.0 / fan_in);
  Rng rng(derive_seed(config_.seed, {0xc0a7u, init_stream_++}));
  ag::Tensor w(ag::Shape{out, in, kernel, kernel});
  for (double& v : w.data()) v = std_dev * rng.normal();
  ag::Tensor b(ag::Shape{1, out, 1, 1}, 0.0);
  Conv c;
  c.weight = params_.size();
  params_.push_back({name + ".weight", ag::leaf(std::move(w), true), role, true});
  c.bias = params_.size();
  params_.push_back({name + ".bias", ag::leaf(std::move(b), true), role, true});
  c.options = options;
  return c;
}

Model::Encoder Model::build_encoder(const std::string& prefix, ParamRole role) {
  Encoder e;
  int in = 3;
  for (std::size_t i = 0; i < config_.encoder_blocks.size(); ++i) {
    const EncoderStage& st = config_.encoder_blocks[i];
    const std::string base = fmt::format("{}.{}", prefix, i);
    Block b;
    b.a = add_conv(base + ".a", role, in, st.width, 3, {st.stride, 1, 1}, 1.0);
    b.b = add_conv(base + ".b", role, st.width, st.width, 3, {1, 1, 1}, 1.0);
    if (st.stride != 1 || in != st.width) {
      b.shortcut = add_conv(base + ".shortcut", role, in, st.width, 1, {st.stride, 0, 1}, 1.0);
    }
    e.stages.push_back(b);
    in = st.width;
  }
  return e;
}

Model::Aspp Model::build_aspp(const std::string& prefix, ParamRole role, int in) {
  Aspp a;
  for (std::size_t i = 0; i < config_.aspp_rates.size(); ++i) {
    const int r = config_.aspp_rates[i];
    const std::string name = fmt::format("{}.rate{}", prefix, r);
    if (r == 1) {
      a.branches.push_back(add_conv(name, role, in, config_.aspp_width, 1, {}, 1.0));
    } else {
      a.branches.push_back(add_conv(name, role, in, config_.aspp_width, 3, {1, r, r}, 1.0));
    }
  }
  a.pooled = add_conv(prefix + ".pool", role, in, config_.aspp_width, 1, {}, 1.0);
  const int concat = config_.aspp_width * static_cast<int>(config_.aspp_rates.size() + 1);
  a.project = add_conv(prefix + ".project", role, concat, config_.aspp_width, 1, {}, 1.0);
  return a;
}

ag::Var Model::apply(const Conv& c, const ag::Var& x) const {
  return ag::conv2d(x, params_[c.weight].var, params_[c.bias].var, c.options);
}

std::vector<ag::Var> Model::run_encoder(const Encoder& e, const ag::Var& x) const {
  std::vector<ag::Var> features;
  ag::Var cur = x;
  for (const Block& b : e.stages) {
    ag::Var h = ag::relu(apply(b.a, cur));
    h = apply(b.b, h);
    ag::Var skip = b.shortcut ? apply(*b.shortcut, cur) : cur;
    cur = ag::relu(ag::add(h, skip));
    features.push_back(cur);
  }
  return features;
}

ag::Var Model::run_aspp(const Aspp& a, const ag::Var& x) const {
  const ag::Shape& s = x->value.shape();
  std::vector<ag::Var> parts;
  for (const Conv& c : a.branches) parts.push_back(ag::relu(apply(c, x)));
  parts.push_back(ag::broadcast_spatial(ag::relu(apply(a.pooled, ag::global_avg_pool(x))), s.h, s.w));
  return ag::relu(apply(a.project, ag::concat_channels(parts)));
}

void Model::check_input(int height, int width) const {
  const int s = config_.total_stride();
  if (height % s != 0 || width % s != 0) {
    fail(ErrorCode::dimension_mismatch,
         fmt::format("input {}x{} is not divisible by the encoder stride {}", height, width, s));
  }
}

GraphOutput Model::forward_graph(const ag::Tensor& images, const ag::Tensor* guidance) const {
  const ag::Shape in = images.shape();
  if (in.c != 3) fail(ErrorCode::channel_mismatch, "model input must have 3 channels");
  check_input(in.h, in.w);
  if (guidance) {
    const ag::Shape gs = guidance->shape();
    if (gs.n != in.n || gs.c != config_.class_count || gs.h != in.h || gs.w != in.w) {
      fail(ErrorCode::dimension_mismatch, "guidance planes do not match the input");
    }
  }

  const ag::Var x = ag::constant(images);
  const std::vector<ag::Var> features = run_encoder(encoder_, x);
  const ag::Var shared = run_aspp(aspp_, features.back());

  ag::Var semantic_features = shared;
  if (semantic_encoder_) semantic_features = run_aspp(*semantic_aspp_, run_encoder(*semantic_encoder_, x).back());
  const ag::Var low_logits = apply(semantic_logits_, ag::relu(apply(semantic_hidden_, semantic_features)));

  GraphOutput out;
  out.logits = ag::resize_bilinear(low_logits, in.h, in.w);

  const bool fuse = config_.variant != FusionVariant::shared_no_fusion;
  ag::Var planes;
  if (fuse) planes = guidance ? ag::constant(*guidance) : ag::softmax_channels(out.logits);

  const int total = config_.total_stride();
  const int levels = static_cast<int>(decoder_.size());
  ag::Var cur = shared;
  int previous_stride = total;
  for (int k = 0; k < levels; ++k) {
    const int stride = decoder_stride(total, k);
    cur = ag::resize_bilinear(cur, in.h / stride, in.w / stride);
    std::vector<ag::Var> parts{cur};
    for (int id : config_.skip_stage_ids) {
      const int s = config_.stage_stride(id);
      if ((s == stride && s != previous_stride) || (s == stride && k == 0 && s == total)) {
        parts.push_back(features[static_cast<std::size_t>(id)]);
      }
    }
    if (fuse && k == config_.fusion_stage) parts.push_back(ag::avg_pool(planes, stride));
    if (config_.input_skip && k == levels - 1) parts.push_back(x);
    const DecoderStage& d = decoder_[static_cast<std::size_t>(k)];
    cur = ag::relu(apply(d.b, ag::relu(apply(d.a, ag::concat_channels(parts)))));
    previous_stride = stride;
  }
  ag::Var background = apply(background_head_, cur);
  if (config_.residual_background) {
    ag::Tensor prior = images;
    for (double& v : prior.data()) {
      const double p = std::clamp(v, kLogitMargin, 1.0 - kLogitMargin);
      v = std::log(p / (1.0 - p));
    }
    background = ag::add(background, ag::constant(std::move(prior)));
  }
  out.background = ag::sigmoid(background);
  out.reflection = ag::sigmoid(apply(reflection_head_, cur));
  return out;
}

ModelOutput Model::unpack(const GraphOutput& g) const {
  return {logits_from_batch(g.logits->value, 0), image_from_batch(g.background->value, 0),
          image_from_batch(g.reflection->value, 0)};
}

ModelOutput Model::forward(const ImageTensor& image) const {
  ag::NoGradGuard no_grad;
  return unpack(forward_graph(to_batch(image)));
}

ModelOutput Model::inject_semantic(const ImageTensor& image, const SemanticMap& semantic) const {
  if (semantic.height() != image.height() || semantic.width() != image.width()) {
    fail(ErrorCode::dimension_mismatch, "semantic map does not match the image");
  }
  const ag::Tensor guidance = one_hot_guidance(semantic, config_.class_count);
  ag::NoGradGuard no_grad;
  return unpack(forward_graph(to_batch(image), &guidance));
}

const Parameter* Model::find(std::string_view name) const {
  for (const Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.var->value.size();
  return n;
}

std::size_t Model::trainable_parameter_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) {
    if (p.trainable) n += p.var->value.size();
  }
  return n;
}

bool Model::semantic_exclusive(const Parameter& p) const {
  return p.role == ParamRole::semantic_head || p.role == ParamRole::semantic_encoder ||
         p.role == ParamRole::semantic_aspp;
}

std::string Model::summary() const {
  std::ostringstream out;
  out << fmt::format("variant {}  total stride {}  parameters {} ({} trainable)\n", to_string(config_.variant),
                     config_.total_stride(), parameter_count(), trainable_parameter_count());
  for (const Parameter& p : params_) {
    out << fmt::format("  {:<32} {:<18} {:>8} {}\n", p.name, ag::to_string(p.var->value.shape()),
                       p.var->value.size(), p.trainable ? "" : "frozen");
  }
  return out.str();
}

void Model::zero_grad() {
  for (Parameter& p : params_) p.var->grad = ag::Tensor();
}

Model Model::clone() const {
  Model copy(config_);
  for (std::size_t i = 0; i < params_.size(); ++i) copy.params_[i].var->value = params_[i].var->value;
  return copy;
}

}  // namespace srrn
