#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "srrn/losses.hpp"
#include "srrn/manifest.hpp"
#include "srrn/model.hpp"

namespace srrn {

struct TrainConfig {
  std::filesystem::path manifest;
  ModelConfig model;
  LossWeights weights;
  double momentum = 0.99;
  double lr_init = 0.007;
  std::int64_t lr_decay_every = 30000;
  double lr_floor = 0.0001;
  double lr_decay_factor = 0.1;
  int batch_size = 2;
  std::int64_t max_steps = 1000;
  /// Square crop side; 0 trains on whole records.
  int crop = 64;
  std::uint64_t seed = 0;
  /// Intermediate checkpoint period; 0 writes only the final one.
  std::int64_t eval_every = 0;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// max(lr_floor, lr_init * lr_decay_factor^floor(step / lr_decay_every))
double learning_rate(std::int64_t step, const TrainConfig& config);

struct LossRow {
  std::int64_t step = 0;
  double l_b = 0.0;
  double l_b_ssim = 0.0;
  double l_b_l1 = 0.0;
  double l_b_edge = 0.0;
  double l_r = 0.0;
  double l_s = 0.0;
  double l_reg = 0.0;
  double total = 0.0;
  double lr = 0.0;
  double sigma_R = 1.0;
  double sigma_S = 1.0;
};

inline constexpr std::string_view kLossLogHeader =
    "step,l_b,l_b_ssim,l_b_l1,l_b_edge,l_r,l_s,l_reg,total,lr,sigma_R,sigma_S";
std::string format_loss_row(const LossRow& row);
std::vector<LossRow> read_loss_log(const std::filesystem::path& path);

struct TrainOptions {
  /// Where the loss log and checkpoints go; empty keeps everything in memory.
  std::filesystem::path out_dir;
  std::function<void(const LossRow&)> on_step;
};

struct TrainResult {
  Model model;
  std::vector<LossRow> log;
  double log_sigma_R = 0.0;
  double log_sigma_S = 0.0;
  std::filesystem::path checkpoint;
};

/// Momentum SGD on the trainable parameters over the manifest's train split.
TrainResult train(const TrainConfig& config, const DatasetManifest& manifest, const TrainOptions& options = {});
TrainResult train(const TrainConfig& config, const TrainOptions& options = {});

/// Produces the three layers for one record.
using Predictor = std::function<ModelOutput(const Quadruple&)>;
Predictor model_predictor(const Model& model);
/// Reconstruction guided by each record's ground-truth semantic map.
Predictor injected_predictor(const Model& model);

struct EvalRow {
  std::string record_id;
  double psnr_B = 0.0;
  double ssim_B = 0.0;
  std::optional<double> psnr_R;
  std::optional<double> ssim_R;
  std::optional<double> miou;
  std::optional<double> alpha;
};

struct EvalAggregate {
  std::string name;
  double psnr_B = 0.0;
  double ssim_B = 0.0;
  std::optional<double> psnr_R;
  std::optional<double> ssim_R;
  std::optional<double> miou;
  std::size_t count = 0;
};

struct EvalReport {
  std::string name = "SRRN";
  std::vector<EvalRow> rows;
  /// I scored as B^; reflection and semantic columns are absent.
  std::vector<EvalRow> input_rows;
  EvalAggregate aggregate;
  EvalAggregate input;
};

EvalAggregate aggregate_rows(const std::string& name, const std::vector<EvalRow>& rows);

/// nullopt split evaluates every record.
EvalReport evaluate(const Predictor& predictor, const DatasetManifest& manifest, std::optional<Split> split,
                    const std::string& name = "SRRN");
EvalReport evaluate(const std::filesystem::path& checkpoint, const DatasetManifest& manifest,
                    std::optional<Split> split);

/// rows.csv (per record, including Input rows), summary.json and a text table.
void write_eval_report(const EvalReport& report, const std::filesystem::path& dir);
std::vector<EvalAggregate> read_eval_summary(const std::filesystem::path& dir);
std::string format_table(const std::vector<EvalAggregate>& rows);

enum class AblationName { full, no_semantic, no_fusion, no_edge_term, gt_semantic };
std::string_view to_string(AblationName n);
AblationName parse_ablation(std::string_view s);

struct AblationSpec {
  AblationName name = AblationName::full;

  static AblationSpec from_name(std::string_view s) { return {parse_ablation(s)}; }
  TrainConfig apply(const TrainConfig& base) const;
  bool inject_ground_truth() const { return name == AblationName::gt_semantic; }
};

struct AblationResult {
  TrainResult training;
  EvalReport report;
};

/// Trains with the spec's overrides and evaluates on the val split.
AblationResult run_ablation(const TrainConfig& base, const AblationSpec& spec, const DatasetManifest& manifest,
                            const TrainOptions& options = {});

struct AlphaRow {
  double alpha = 0.0;
  double mean_miou = 0.0;
  double miou_ci_half_width = 0.0;
  double mean_ssim_B = 0.0;
  double ssim_ci_half_width = 0.0;
  double mean_psnr_B = 0.0;
  double psnr_ci_half_width = 0.0;
  std::size_t count = 0;
};

struct AlphaStudy {
  std::vector<AlphaRow> rows;
  /// Spearman correlation of alpha with mean mIoU over the rows.
  double miou_trend = 0.0;
};

/// Per-alpha aggregates over every record of a sweep manifest.
AlphaStudy alpha_study(const Predictor& predictor, const DatasetManifest& sweep, double ci_level = 0.95);
AlphaStudy alpha_study(const std::filesystem::path& checkpoint, const DatasetManifest& sweep);

/// alpha_study.csv plus one series file per metric (alpha, value, ci).
void write_alpha_study(const AlphaStudy& study, const std::filesystem::path& dir);

}  // namespace srrn
