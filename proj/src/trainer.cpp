#include "srrn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "srrn/checkpoint.hpp"
#include "srrn/datagen.hpp"
#include "srrn/error.hpp"
#include "srrn/metrics.hpp"
#include "srrn/random.hpp"

namespace srrn {

void TrainConfig::validate() const {
  const auto bad = [](const std::string& m) { fail(ErrorCode::invalid_argument, m); };
  if (!(lr_floor > 0.0) || !(lr_init > lr_floor)) bad("learning rates must satisfy lr_init > lr_floor > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) bad("momentum must be in [0, 1)");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) bad("lr_decay_factor must be in (0, 1]");
  if (lr_decay_every < 1) bad("lr_decay_every must be >= 1");
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (max_steps < 0) bad("max_steps must be >= 0");
  if (eval_every < 0) bad("eval_every must be >= 0");
  if (crop < 0) bad("crop must be >= 0");
  model.validate();
  if (crop > 0 && crop % model.total_stride() != 0) {
    bad(fmt::format("crop {} is not divisible by the encoder stride {}", crop, model.total_stride()));
  }
  weights.validate();
}

double learning_rate(std::int64_t step, const TrainConfig& config) {
  if (step < 0) fail(ErrorCode::invalid_argument, "step must be >= 0");
  const double decays = static_cast<double>(step / config.lr_decay_every);
  return std::max(config.lr_floor, config.lr_init * std::pow(config.lr_decay_factor, decays));
}

std::string format_loss_row(const LossRow& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}", r.step, r.l_b, r.l_b_ssim, r.l_b_l1, r.l_b_edge, r.l_r,
                     r.l_s, r.l_reg, r.total, r.lr, r.sigma_R, r.sigma_S);
}

std::vector<LossRow> read_loss_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::file_not_found, fmt::format("loss log '{}' not found", path.string()));
  std::string line;
  if (!std::getline(in, line) || line != kLossLogHeader) {
    fail(ErrorCode::decode_failed, fmt::format("'{}' is not a loss log", path.string()));
  }
  std::vector<LossRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 12) fail(ErrorCode::decode_failed, fmt::format("malformed loss log row '{}'", line));
    LossRow r;
    r.step = std::stoll(cells[0]);
    double* fields[] = {&r.l_b, &r.l_b_ssim, &r.l_b_l1, &r.l_b_edge, &r.l_r, &r.l_s,
                        &r.l_reg, &r.total, &r.lr, &r.sigma_R, &r.sigma_S};
    for (std::size_t i = 0; i < 11; ++i) *fields[i] = std::stod(cells[i + 1]);
    rows.push_back(r);
  }
  return rows;
}

namespace {

struct Sample {
  ImageTensor mixed;
  ImageTensor background;
  ImageTensor reflection;
  SemanticMap semantic;
};

std::vector<Quadruple> load_split(const DatasetManifest& manifest, std::optional<Split> split) {
  std::vector<Quadruple> out;
  for (const RecordRef& r : manifest.records) {
    if (!split || r.split == *split) out.push_back(load_quadruple(manifest, r));
  }
  return out;
}

Sample crop_sample(const Quadruple& q, int size, std::uint64_t seed) {
  if (size == 0) return {q.mixed, q.background, q.reflection, q.semantic};
  if (size > q.mixed.height() || size > q.mixed.width()) {
    fail(ErrorCode::dimension_mismatch, fmt::format("crop {} exceeds record '{}' of size {}x{}", size, q.id,
                                                    q.mixed.height(), q.mixed.width()));
  }
  const CropOffset off = crop_offset(q.mixed.height(), q.mixed.width(), size, seed);
  return {crop(q.mixed, off, size), crop(q.background, off, size), crop(q.reflection, off, size),
          crop(q.semantic, off, size)};
}

void check_finite(double v, const char* component, std::int64_t step) {
  if (!std::isfinite(v)) {
    fail(ErrorCode::non_finite, fmt::format("non-finite {} at step {}", component, step));
  }
}

void put_sample(ag::Tensor& t, int n, const Planes& p, double scale) {
  const std::size_t len = p.size();
  double* dst = t.ptr() + static_cast<std::size_t>(n) * len;
  const auto src = p.data();
  for (std::size_t i = 0; i < len; ++i) dst[i] = scale * src[i];
}

ag::Tensor scalar_tensor(double v) { return ag::Tensor(ag::Shape{1, 1, 1, 1}, v); }

// Batch order: a fresh seeded permutation of the train records every epoch.
class BatchSchedule {
 public:
  BatchSchedule(std::size_t records, std::uint64_t seed) : records_(records), seed_(seed) {}

  struct Pick {
    std::size_t record;
    std::uint64_t epoch;
  };

  Pick at(std::uint64_t position) {
    const std::uint64_t epoch = position / records_;
    if (!current_ || *current_ != epoch) {
      order_.resize(records_);
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      Rng rng(derive_seed(seed_, {0xe90c, epoch}));
      for (std::size_t i = records_; i > 1; --i) std::swap(order_[i - 1], order_[rng.below(i)]);
      current_ = epoch;
    }
    return {order_[position % records_], epoch};
  }

 private:
  std::size_t records_;
  std::uint64_t seed_;
  std::optional<std::uint64_t> current_;
  std::vector<std::size_t> order_;
};

}  // namespace

TrainResult train(const TrainConfig& config, const DatasetManifest& manifest, const TrainOptions& options) {
  config.validate();
  if (manifest.class_count != config.model.class_count) {
    fail(ErrorCode::dimension_mismatch, fmt::format("manifest has {} classes but the model predicts {}",
                                                    manifest.class_count, config.model.class_count));
  }
  const std::vector<Quadruple> records = load_split(manifest, Split::train);
  if (records.empty()) fail(ErrorCode::empty_input, "manifest has no train records");

  TrainResult result{Model(config.model), {}, std::log(config.weights.sigma_R), std::log(config.weights.sigma_S), {}};
  Model& model = result.model;
  const bool learnable = config.weights.sigma_mode == SigmaMode::learnable;

  std::ofstream log;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    log.open(options.out_dir / "loss_log.csv", std::ios::binary | std::ios::trunc);
    if (!log) fail(ErrorCode::io_failure, fmt::format("cannot write into '{}'", options.out_dir.string()));
    log << kLossLogHeader << '\n';
  }
  const auto sigma_arrays = [&] {
    return std::vector<NamedArray>{{"loss.log_sigma_R", scalar_tensor(result.log_sigma_R)},
                                   {"loss.log_sigma_S", scalar_tensor(result.log_sigma_S)}};
  };

  std::vector<Parameter>& params = model.parameters();
  std::vector<ag::Tensor> velocity;
  for (const Parameter& p : params) velocity.emplace_back(p.var->value.shape());
  double v_sigma_R = 0.0, v_sigma_S = 0.0;

  BatchSchedule schedule(records.size(), config.seed);
  const int n = config.batch_size;
  for (std::int64_t step = 0; step < config.max_steps; ++step) {
    std::vector<Sample> batch;
    for (int i = 0; i < n; ++i) {
      const auto pick = schedule.at(static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(n) +
                                    static_cast<std::uint64_t>(i));
      batch.push_back(crop_sample(records[pick.record], config.crop,
                                  derive_seed(config.seed, {0xc409, pick.epoch, pick.record})));
      if (!batch.back().mixed.same_size(batch.front().mixed)) {
        fail(ErrorCode::dimension_mismatch, "records in a batch differ in size; set train.crop");
      }
    }
    std::vector<ImageTensor> inputs;
    for (const Sample& s : batch) inputs.push_back(s.mixed);

    model.zero_grad();
    const GraphOutput g = model.forward_graph(to_batch(inputs));

    LossWeights w = config.weights;
    w.sigma_R = std::exp(result.log_sigma_R);
    w.sigma_S = std::exp(result.log_sigma_S);

    LossRow row;
    row.step = step;
    row.lr = learning_rate(step, config);
    row.sigma_R = w.sigma_R;
    row.sigma_S = w.sigma_S;

    std::vector<Planes> grad_b, grad_r;
    std::vector<std::optional<Planes>> grad_s;
    std::size_t scored = 0;
    for (int i = 0; i < n; ++i) {
      const Sample& s = batch[static_cast<std::size_t>(i)];
      BackgroundLoss lb = background_loss_with_gradient(planes_from_batch(g.background->value, i),
                                                        s.background.planes(), w);
      row.l_b += lb.value() / n;
      row.l_b_ssim += lb.terms.ssim_term / n;
      row.l_b_l1 += lb.terms.l1_term / n;
      row.l_b_edge += lb.terms.edge_term / n;
      grad_b.push_back(std::move(lb.grad));
      LossGradient lr = reflection_loss_with_gradient(planes_from_batch(g.reflection->value, i), s.reflection.planes());
      row.l_r += lr.value / n;
      grad_r.push_back(std::move(lr.grad));
      std::optional<LossGradient> ls = semantic_loss_with_gradient(planes_from_batch(g.logits->value, i), s.semantic);
      if (ls) {
        ++scored;
        row.l_s += ls->value;
        grad_s.emplace_back(std::move(ls->grad));
      } else {
        grad_s.emplace_back();
      }
    }
    if (scored > 0) row.l_s /= static_cast<double>(scored);

    std::vector<ParameterGroup> groups;
    for (const Parameter& p : params) groups.push_back({p.var->value.data(), p.trainable});
    row.l_reg = l2_regularization(groups);

    check_finite(row.l_b, "l_b", step);
    check_finite(row.l_r, "l_r", step);
    check_finite(row.l_s, "l_s", step);
    check_finite(row.l_reg, "l_reg", step);
    const LossBreakdown total = total_loss(row.l_b, row.l_r, row.l_s, row.l_reg, w);
    row.total = total.total;
    check_finite(row.total, "total", step);
    const TotalLossGradient tg = total_loss_gradient(row.l_b, row.l_r, row.l_s, row.l_reg, w);

    std::vector<std::pair<ag::Var, ag::Tensor>> seeds;
    if (tg.d_l_b != 0.0) {
      ag::Tensor t(g.background->value.shape());
      for (int i = 0; i < n; ++i) put_sample(t, i, grad_b[static_cast<std::size_t>(i)], tg.d_l_b / n);
      seeds.emplace_back(g.background, std::move(t));
    }
    if (tg.d_l_r != 0.0) {
      ag::Tensor t(g.reflection->value.shape());
      for (int i = 0; i < n; ++i) put_sample(t, i, grad_r[static_cast<std::size_t>(i)], tg.d_l_r / n);
      seeds.emplace_back(g.reflection, std::move(t));
    }
    if (tg.d_l_s != 0.0 && scored > 0) {
      ag::Tensor t(g.logits->value.shape());
      for (int i = 0; i < n; ++i) {
        if (grad_s[static_cast<std::size_t>(i)]) {
          put_sample(t, i, *grad_s[static_cast<std::size_t>(i)], tg.d_l_s / static_cast<double>(scored));
        }
      }
      seeds.emplace_back(g.logits, std::move(t));
    }
    ag::backward(seeds);

    for (std::size_t k = 0; k < params.size(); ++k) {
      Parameter& p = params[k];
      if (!p.trainable) continue;
      const std::vector<double> reg = l2_norm_gradient(p.var->value.data());
      const bool has_grad = !p.var->grad.empty();
      auto value = p.var->value.data();
      auto vel = velocity[k].data();
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double gi = (has_grad ? p.var->grad[i] : 0.0) + tg.d_l_reg * reg[i];
        if (!std::isfinite(gi)) {
          fail(ErrorCode::non_finite, fmt::format("non-finite gradient of {} at step {}", p.name, step));
        }
        vel[i] = config.momentum * vel[i] - row.lr * gi;
        value[i] += vel[i];
      }
    }
    if (learnable) {
      v_sigma_R = config.momentum * v_sigma_R - row.lr * tg.d_log_sigma_R;
      v_sigma_S = config.momentum * v_sigma_S - row.lr * tg.d_log_sigma_S;
      result.log_sigma_R += v_sigma_R;
      result.log_sigma_S += v_sigma_S;
    }

    if (log.is_open()) log << format_loss_row(row) << '\n';
    if (options.on_step) options.on_step(row);
    result.log.push_back(row);

    if (!options.out_dir.empty() && config.eval_every > 0 && (step + 1) % config.eval_every == 0 &&
        step + 1 < config.max_steps) {
      save_checkpoint(make_checkpoint(model, step + 1, sigma_arrays()),
                      options.out_dir / fmt::format("model_step_{}.ckpt", step + 1));
    }
  }
  model.zero_grad();

  if (!options.out_dir.empty()) {
    log.close();
    result.checkpoint = options.out_dir / "model.ckpt";
    save_checkpoint(make_checkpoint(model, config.max_steps, sigma_arrays()), result.checkpoint);
  }
  return result;
}

TrainResult train(const TrainConfig& config, const TrainOptions& options) {
  return train(config, load_manifest(config.manifest), options);
}

Predictor model_predictor(const Model& model) {
  return [&model](const Quadruple& q) { return model.forward(q.mixed); };
}

Predictor injected_predictor(const Model& model) {
  return [&model](const Quadruple& q) { return model.inject_semantic(q.mixed, q.semantic); };
}

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

std::optional<double> mean_present(const std::vector<EvalRow>& rows, std::optional<double> EvalRow::*field) {
  std::vector<double> v;
  for (const EvalRow& r : rows) {
    if (r.*field) v.push_back(*(r.*field));
  }
  if (v.empty()) return std::nullopt;
  return mean_of(v);
}

}  // namespace

EvalAggregate aggregate_rows(const std::string& name, const std::vector<EvalRow>& rows) {
  EvalAggregate a;
  a.name = name;
  a.count = rows.size();
  if (rows.empty()) return a;
  std::vector<double> psnr, ssim;
  for (const EvalRow& r : rows) {
    psnr.push_back(r.psnr_B);
    ssim.push_back(r.ssim_B);
  }
  a.psnr_B = mean_of(psnr);
  a.ssim_B = mean_of(ssim);
  a.psnr_R = mean_present(rows, &EvalRow::psnr_R);
  a.ssim_R = mean_present(rows, &EvalRow::ssim_R);
  a.miou = mean_present(rows, &EvalRow::miou);
  return a;
}

EvalReport evaluate(const Predictor& predictor, const DatasetManifest& manifest, std::optional<Split> split,
                    const std::string& name) {
  EvalReport report;
  report.name = name;
  for (const RecordRef& ref : manifest.records) {
    if (split && ref.split != *split) continue;
    const Quadruple q = load_quadruple(manifest, ref);
    const ModelOutput out = predictor(q);
    if (!out.background.same_size(q.background) || !out.reflection.same_size(q.reflection) ||
        out.semantic_logits.height() != q.semantic.height() || out.semantic_logits.width() != q.semantic.width()) {
      fail(ErrorCode::dimension_mismatch, fmt::format("prediction for '{}' does not match the record size", q.id));
    }
    EvalRow row;
    row.record_id = q.id;
    row.alpha = q.alpha;
    row.psnr_B = psnr(out.background, q.background);
    row.ssim_B = ssim(out.background, q.background);
    row.psnr_R = psnr(out.reflection, q.reflection);
    row.ssim_R = ssim(out.reflection, q.reflection);
    row.miou = miou(out.semantic_logits.argmax(), q.semantic, manifest.class_count);
    report.rows.push_back(row);

    EvalRow base;
    base.record_id = q.id;
    base.alpha = q.alpha;
    base.psnr_B = psnr(q.mixed, q.background);
    base.ssim_B = ssim(q.mixed, q.background);
    report.input_rows.push_back(base);
  }
  if (report.rows.empty()) {
    fail(ErrorCode::empty_input,
         fmt::format("manifest has no records in split '{}'", split ? to_string(*split) : std::string_view("all")));
  }
  report.aggregate = aggregate_rows(name, report.rows);
  report.input = aggregate_rows("Input", report.input_rows);
  return report;
}

EvalReport evaluate(const std::filesystem::path& checkpoint, const DatasetManifest& manifest,
                    std::optional<Split> split) {
  const Model model = load_model(checkpoint);
  return evaluate(model_predictor(model), manifest, split);
}

namespace {

using json = nlohmann::ordered_json;

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : "NA"; }

json number(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? json("nan") : json(v > 0 ? "inf" : "-inf");
}

json number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

std::optional<double> read_number(const json& j) {
  if (j.is_null()) return std::nullopt;
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  fail(ErrorCode::decode_failed, "malformed number in evaluation summary");
}

json aggregate_json(const EvalAggregate& a) {
  return {{"name", a.name},         {"ssim_B", number(a.ssim_B)}, {"psnr_B", number(a.psnr_B)},
          {"ssim_R", number(a.ssim_R)}, {"psnr_R", number(a.psnr_R)}, {"miou", number(a.miou)},
          {"count", a.count}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_failure, fmt::format("cannot write '{}'", path.string()));
  out << text;
}

std::string fixed(const std::optional<double>& v, int digits) {
  if (!v) return "N/A";
  if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
  return fmt::format("{:.{}f}", *v, digits);
}

}  // namespace

void write_eval_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::string csv = "method,record_id,alpha,psnr_B,ssim_B,psnr_R,ssim_R,miou\n";
  const auto emit = [&](const std::string& method, const std::vector<EvalRow>& rows) {
    for (const EvalRow& r : rows) {
      csv += fmt::format("{},{},{},{},{},{},{},{}\n", method, r.record_id, cell(r.alpha), r.psnr_B, r.ssim_B,
                         cell(r.psnr_R), cell(r.ssim_R), cell(r.miou));
    }
  };
  emit(report.name, report.rows);
  emit("Input", report.input_rows);
  write_text(dir / "eval_rows.csv", csv);

  json doc = {{"rows", json::array({aggregate_json(report.aggregate), aggregate_json(report.input)})}};
  write_text(dir / "eval_summary.json", doc.dump(2) + "\n");
  write_text(dir / "eval_table.txt", format_table({report.aggregate, report.input}));
}

std::vector<EvalAggregate> read_eval_summary(const std::filesystem::path& dir) {
  const std::filesystem::path path = dir / "eval_summary.json";
  std::ifstream in(path);
  if (!in) fail(ErrorCode::file_not_found, fmt::format("'{}' has no eval_summary.json", dir.string()));
  std::vector<EvalAggregate> out;
  try {
    const json doc = json::parse(in);
    for (const json& r : doc.at("rows")) {
      EvalAggregate a;
      a.name = r.at("name").get<std::string>();
      a.ssim_B = read_number(r.at("ssim_B")).value_or(0.0);
      a.psnr_B = read_number(r.at("psnr_B")).value_or(0.0);
      a.ssim_R = read_number(r.at("ssim_R"));
      a.psnr_R = read_number(r.at("psnr_R"));
      a.miou = read_number(r.at("miou"));
      a.count = r.at("count").get<std::size_t>();
      out.push_back(a);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::decode_failed, fmt::format("malformed '{}': {}", path.string(), e.what()));
  }
  return out;
}

std::string format_table(const std::vector<EvalAggregate>& rows) {
  std::string out = fmt::format("{:<16} {:>8} {:>8} {:>8} {:>8} {:>8}\n", "Method", "SSIM_B", "PSNR_B", "SSIM_R",
                                "PSNR_R", "mIoU");
  for (const EvalAggregate& a : rows) {
    out += fmt::format("{:<16} {:>8} {:>8} {:>8} {:>8} {:>8}\n", a.name, fixed(a.ssim_B, 4), fixed(a.psnr_B, 2),
                       fixed(a.ssim_R, 4), fixed(a.psnr_R, 2), fixed(a.miou, 4));
  }
  return out;
}

std::string_view to_string(AblationName n) {
  switch (n) {
    case AblationName::full: return "full";
    case AblationName::no_semantic: return "no_semantic";
    case AblationName::no_fusion: return "no_fusion";
    case AblationName::no_edge_term: return "no_edge_term";
    case AblationName::gt_semantic: return "gt_semantic";
  }
  return "full";
}

AblationName parse_ablation(std::string_view s) {
  for (AblationName n : {AblationName::full, AblationName::no_semantic, AblationName::no_fusion,
                         AblationName::no_edge_term, AblationName::gt_semantic}) {
    if (to_string(n) == s) return n;
  }
  fail(ErrorCode::invalid_argument, fmt::format("unknown ablation '{}'", s));
}

TrainConfig AblationSpec::apply(const TrainConfig& base) const {
  TrainConfig c = base;
  switch (name) {
    case AblationName::full:
    case AblationName::gt_semantic:
      break;
    case AblationName::no_semantic:
      c.weights.w3 = 0.0;
      c.model.variant = FusionVariant::shared_no_fusion;
      break;
    case AblationName::no_fusion:
      c.model.variant = FusionVariant::shared_no_fusion;
      break;
    case AblationName::no_edge_term:
      c.weights.w1_3 = 0.0;
      break;
  }
  return c;
}

AblationResult run_ablation(const TrainConfig& base, const AblationSpec& spec, const DatasetManifest& manifest,
                            const TrainOptions& options) {
  const TrainConfig config = spec.apply(base);
  AblationResult result{train(config, manifest, options), {}};
  const Model& model = result.training.model;
  const Predictor predictor = spec.inject_ground_truth() ? injected_predictor(model) : model_predictor(model);
  result.report = evaluate(predictor, manifest, Split::val, std::string(to_string(spec.name)));
  return result;
}

namespace {

double half_width(const std::vector<double>& v, double level) {
  if (v.size() < 2) return 0.0;
  return confidence_interval(v, level).half_width;
}

}  // namespace

AlphaStudy alpha_study(const Predictor& predictor, const DatasetManifest& sweep, double ci_level) {
  struct Bucket {
    double alpha = 0.0;
    std::vector<double> miou, ssim, psnr;
  };
  std::map<long long, Bucket> buckets;
  for (const RecordRef& ref : sweep.records) {
    if (!ref.alpha) fail(ErrorCode::invalid_argument, fmt::format("sweep record '{}' has no alpha", ref.id));
  }
  if (sweep.records.empty()) fail(ErrorCode::empty_input, "sweep manifest has no records");
  for (const RecordRef& ref : sweep.records) {
    const Quadruple q = load_quadruple(sweep, ref);
    const ModelOutput out = predictor(q);
    Bucket& b = buckets[std::llround(*ref.alpha * 1e9)];
    b.alpha = *ref.alpha;
    if (const auto m = miou(out.semantic_logits.argmax(), q.semantic, sweep.class_count)) b.miou.push_back(*m);
    b.ssim.push_back(ssim(out.background, q.background));
    b.psnr.push_back(psnr(out.background, q.background));
  }
  AlphaStudy study;
  for (const auto& [key, b] : buckets) {
    AlphaRow row;
    row.alpha = b.alpha;
    row.count = b.ssim.size();
    row.mean_miou = b.miou.empty() ? 0.0 : mean_of(b.miou);
    row.miou_ci_half_width = half_width(b.miou, ci_level);
    row.mean_ssim_B = mean_of(b.ssim);
    row.ssim_ci_half_width = half_width(b.ssim, ci_level);
    row.mean_psnr_B = mean_of(b.psnr);
    row.psnr_ci_half_width = half_width(b.psnr, ci_level);
    study.rows.push_back(row);
  }
  if (study.rows.size() >= 2) {
    std::vector<double> a, m;
    for (const AlphaRow& r : study.rows) {
      a.push_back(r.alpha);
      m.push_back(r.mean_miou);
    }
    study.miou_trend = spearman_correlation(a, m);
  }
  return study;
}

AlphaStudy alpha_study(const std::filesystem::path& checkpoint, const DatasetManifest& sweep) {
  const Model model = load_model(checkpoint);
  return alpha_study(model_predictor(model), sweep);
}

void write_alpha_study(const AlphaStudy& study, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::string table = "alpha,count,mean_miou,miou_ci_half_width,mean_ssim_B,ssim_ci_half_width,mean_psnr_B,psnr_ci_half_width\n";
  std::string miou = "alpha,value,ci\n", ssim_s = miou, psnr_s = miou;
  for (const AlphaRow& r : study.rows) {
    table += fmt::format("{},{},{},{},{},{},{},{}\n", r.alpha, r.count, r.mean_miou, r.miou_ci_half_width,
                         r.mean_ssim_B, r.ssim_ci_half_width, r.mean_psnr_B, r.psnr_ci_half_width);
    miou += fmt::format("{},{},{}\n", r.alpha, r.mean_miou, r.miou_ci_half_width);
    ssim_s += fmt::format("{},{},{}\n", r.alpha, r.mean_ssim_B, r.ssim_ci_half_width);
    psnr_s += fmt::format("{},{},{}\n", r.alpha, r.mean_psnr_B, r.psnr_ci_half_width);
  }
  write_text(dir / "alpha_study.csv", table);
  write_text(dir / "series_miou.csv", miou);
  write_text(dir / "series_ssim_B.csv", ssim_s);
  write_text(dir / "series_psnr_B.csv", psnr_s);
  write_text(dir / "alpha_trend.txt", fmt::format("spearman(alpha, mean_miou) = {}\n", study.miou_trend));
}

}  // namespace srrn
