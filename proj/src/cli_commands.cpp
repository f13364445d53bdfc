#include "srrn/cli.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "srrn/checkpoint.hpp"
#include "srrn/datagen.hpp"
#include "srrn/error.hpp"
#include "srrn/manifest.hpp"
#include "srrn/run_config.hpp"
#include "srrn/scenes.hpp"
#include "srrn/trainer.hpp"

namespace srrn::cli {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

[[noreturn]] void usage(const std::string& msg) { fail(ErrorCode::invalid_config, msg); }

fs::path require_out(const Globals& g) {
  if (g.out.empty()) usage("--out is required");
  return g.out;
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_failure, fmt::format("cannot write '{}'", path.string()));
  out << doc.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_failure, fmt::format("cannot write '{}'", path.string()));
  out << text;
}

std::optional<Split> parse_split_arg(const std::string& s) {
  if (s == "all") return std::nullopt;
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  usage(fmt::format("--split must be train, val or all, got '{}'", s));
}

RunConfigFile load_config(const Globals& g) {
  if (g.config.empty()) usage("--config is required");
  RunConfigFile rc = load_run_config(g.config);
  if (g.seed) {
    rc.train.seed = *g.seed;
    rc.train.model.seed = *g.seed;
  }
  return rc;
}

// ---- scenes ---------------------------------------------------------------

struct ScenesArgs {
  std::size_t backgrounds = 40;
  std::size_t reflections = 40;
  int size = 48;
  int max_objects = 4;
  int classes = kClassCount;
};

int cmd_scenes(const Globals& g, const ScenesArgs& a, std::ostream& out) {
  const fs::path dir = require_out(g);
  SceneOptions opts;
  opts.size = a.size;
  opts.max_objects = a.max_objects;
  opts.class_count = a.classes;
  opts.seed = g.seed.value_or(0);
  write_scene_sources(dir, opts, a.backgrounds, a.reflections);
  write_json(dir / "resolved_config.json", {{"command", "scenes"},
                                            {"seed", opts.seed},
                                            {"backgrounds", a.backgrounds},
                                            {"reflections", a.reflections},
                                            {"size", a.size},
                                            {"max_objects", a.max_objects},
                                            {"classes", a.classes}});
  out << fmt::format("wrote {} backgrounds and {} reflections to {}\n", a.backgrounds, a.reflections, dir.string());
  return kSuccess;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  std::string backgrounds;
  std::string labels;
  std::string reflections;
  std::size_t count = 10;
  std::string alpha = "uniform 0.1:0.9";
  int crop = 256;
  double train_fraction = 0.8;
  int classes = kClassCount;
};

struct AlphaSpec {
  std::optional<AlphaSampler> sampler;
  std::vector<double> grid;
};

AlphaSpec parse_alpha_spec(const std::string& spec) {
  std::istringstream in(spec);
  std::string kind, arg;
  in >> kind >> arg;
  AlphaSpec out;
  try {
    if (kind == "fixed" && !arg.empty()) {
      out.sampler = AlphaSampler::fixed(std::stod(arg));
      return out;
    }
    if (kind == "uniform" && !arg.empty()) {
      const auto colon = arg.find(':');
      if (colon == std::string::npos) usage("uniform alpha spec needs lo:hi");
      out.sampler = AlphaSampler::uniform(std::stod(arg.substr(0, colon)), std::stod(arg.substr(colon + 1)));
      return out;
    }
    if (kind == "sweep" && !arg.empty()) {
      out.grid = parse_alpha_grid(arg);
      return out;
    }
  } catch (const std::logic_error&) {
    usage(fmt::format("malformed alpha spec '{}'", spec));
  }
  usage(fmt::format("alpha spec must be 'fixed A', 'uniform LO:HI' or 'sweep LO:HI:STEP', got '{}'", spec));
}

std::string alpha_histogram(const DatasetManifest& m) {
  std::array<std::size_t, 10> bins{};
  for (const RecordRef& r : m.records) {
    if (!r.alpha) continue;
    const int b = std::clamp(static_cast<int>(std::floor(*r.alpha * 10.0 + 1e-9)), 0, 9);
    ++bins[static_cast<std::size_t>(b)];
  }
  std::string out = "alpha histogram:\n";
  for (int b = 0; b < 10; ++b) {
    out += fmt::format("  [{:.1f}, {:.1f}{} {}\n", b / 10.0, (b + 1) / 10.0, b == 9 ? "]" : ")",
                       bins[static_cast<std::size_t>(b)]);
  }
  return out;
}

int cmd_synth(const Globals& g, const SynthArgs& a, std::ostream& out) {
  const fs::path dir = require_out(g);
  if (a.backgrounds.empty() || a.reflections.empty()) usage("--backgrounds and --reflections are required");
  const AlphaSpec alpha = parse_alpha_spec(a.alpha);
  const fs::path labels = a.labels.empty() ? fs::path(a.backgrounds).parent_path() / "labels" : fs::path(a.labels);
  const std::vector<LabeledImage> bgs = load_labeled_images(a.backgrounds, labels, a.classes);
  const std::vector<SourceImage> refls = load_source_images(a.reflections);

  SynthesisOptions opts;
  opts.crop_size = a.crop;
  opts.seed = g.seed.value_or(0);
  opts.out_dir = dir;
  opts.class_count = a.classes;
  DatasetManifest m = alpha.sampler ? synthesize_dataset(bgs, refls, a.count, *alpha.sampler, opts)
                                    : alpha_sweep(bgs, refls, a.count, alpha.grid, opts);
  if (alpha.sampler && a.train_fraction > 0.0) {
    m = split_dataset(m, a.train_fraction, opts.seed);
    m.root = dir;
    save_manifest(m, dir / opts.manifest_name);
  }
  write_json(dir / "resolved_config.json", {{"command", "synth"},
                                            {"seed", opts.seed},
                                            {"backgrounds", a.backgrounds},
                                            {"labels", labels.generic_string()},
                                            {"reflections", a.reflections},
                                            {"count", a.count},
                                            {"alpha", a.alpha},
                                            {"crop", a.crop},
                                            {"train_fraction", a.train_fraction},
                                            {"classes", a.classes}});
  out << fmt::format("{} records written to {}\n", m.records.size(), (dir / opts.manifest_name).string());
  out << alpha_histogram(m);
  return kSuccess;
}

// ---- train / eval / ablate / alpha-study / report -------------------------

int cmd_train(const Globals& g, std::ostream& out) {
  const RunConfigFile rc = load_config(g);
  const fs::path dir = require_out(g);
  echo_run_config(rc, dir);
  TrainOptions opts;
  opts.out_dir = dir;
  const TrainResult r = train(rc.train, opts);
  if (r.log.empty()) {
    out << fmt::format("no steps run; initial checkpoint at {}\n", r.checkpoint.string());
  } else {
    out << fmt::format("{} steps, total loss {:.6g} -> {:.6g}; checkpoint {}\n", r.log.size(), r.log.front().total,
                       r.log.back().total, r.checkpoint.string());
  }
  return kSuccess;
}

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "val";
  bool inject_gt = false;
};

fs::path eval_manifest(const Globals& g, const std::string& manifest) {
  if (!manifest.empty()) return manifest;
  if (!g.config.empty()) return load_run_config(g.config).train.manifest;
  usage("--manifest (or --config naming dataset.manifest) is required");
}

int cmd_eval(const Globals& g, const EvalArgs& a, std::ostream& out) {
  const fs::path dir = require_out(g);
  if (a.checkpoint.empty()) usage("--checkpoint is required");
  const std::optional<Split> split = parse_split_arg(a.split);
  const fs::path manifest_path = eval_manifest(g, a.manifest);
  const DatasetManifest manifest = load_manifest(manifest_path);
  const Model model = load_model(a.checkpoint);
  const Predictor predictor = a.inject_gt ? injected_predictor(model) : model_predictor(model);
  const EvalReport report = evaluate(predictor, manifest, split, a.inject_gt ? "SRRN+S_B" : "SRRN");
  fs::create_directories(dir);
  write_eval_report(report, dir);
  write_json(dir / "resolved_config.json", {{"command", "eval"},
                                            {"checkpoint", a.checkpoint},
                                            {"manifest", manifest_path.generic_string()},
                                            {"split", a.split},
                                            {"inject_gt", a.inject_gt},
                                            {"model", json::parse(model_config_to_json(model.config()))}});
  out << format_table({report.aggregate, report.input});
  return kSuccess;
}

struct AblateArgs {
  std::vector<std::string> specs{"full", "no_semantic", "no_fusion", "no_edge_term", "gt_semantic"};
};

int cmd_ablate(const Globals& g, const AblateArgs& a, std::ostream& out) {
  const RunConfigFile rc = load_config(g);
  const fs::path dir = require_out(g);
  std::vector<AblationSpec> specs;
  for (const std::string& s : a.specs) {
    try {
      specs.push_back(AblationSpec::from_name(s));
    } catch (const Error& e) {
      usage(e.what());
    }
  }
  const DatasetManifest manifest = load_manifest(rc.train.manifest);
  echo_run_config(rc, dir);
  std::vector<EvalAggregate> rows;
  std::optional<EvalAggregate> input;
  for (const AblationSpec& spec : specs) {
    const fs::path sub = dir / std::string(to_string(spec.name));
    RunConfigFile applied = rc;
    applied.train = spec.apply(rc.train);
    echo_run_config(applied, sub);
    TrainOptions opts;
    opts.out_dir = sub;
    const AblationResult r = run_ablation(rc.train, spec, manifest, opts);
    write_eval_report(r.report, sub);
    rows.push_back(r.report.aggregate);
    if (!input) input = r.report.input;
    out << fmt::format("{}: SSIM_B {:.4f}\n", to_string(spec.name), r.report.aggregate.ssim_B);
  }
  if (input) rows.push_back(*input);
  const std::string table = format_table(rows);
  write_text(dir / "ablation_table.txt", table);
  out << table;
  return kSuccess;
}

struct AlphaArgs {
  std::string checkpoint;
  std::string manifest;
  double ci_level = 0.95;
};

int cmd_alpha_study(const Globals& g, const AlphaArgs& a, std::ostream& out) {
  const fs::path dir = require_out(g);
  if (a.checkpoint.empty() || a.manifest.empty()) usage("--checkpoint and --manifest are required");
  const DatasetManifest sweep = load_manifest(a.manifest);
  const Model model = load_model(a.checkpoint);
  const AlphaStudy study = alpha_study(model_predictor(model), sweep, a.ci_level);
  write_alpha_study(study, dir);
  write_json(dir / "resolved_config.json", {{"command", "alpha-study"},
                                            {"checkpoint", a.checkpoint},
                                            {"manifest", a.manifest},
                                            {"ci_level", a.ci_level}});
  out << fmt::format("{:>6} {:>6} {:>9} {:>8} {:>8} {:>8}\n", "alpha", "n", "mIoU", "+-", "SSIM_B", "PSNR_B");
  for (const AlphaRow& r : study.rows) {
    out << fmt::format("{:>6.2f} {:>6} {:>9.4f} {:>8.4f} {:>8.4f} {:>8.2f}\n", r.alpha, r.count, r.mean_miou,
                       r.miou_ci_half_width, r.mean_ssim_B, r.mean_psnr_B);
  }
  out << fmt::format("spearman(alpha, mIoU) = {:.4f}\n", study.miou_trend);
  return kSuccess;
}

std::string csv_cell(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : "NA"; }

int cmd_report(const Globals& g, const std::vector<std::string>& runs, std::ostream& out) {
  if (runs.empty()) usage("report needs at least one run directory");
  std::vector<EvalAggregate> rows;
  std::optional<EvalAggregate> input;
  for (const std::string& run : runs) {
    const std::vector<EvalAggregate> summary = read_eval_summary(run);
    auto model = std::find_if(summary.begin(), summary.end(), [](const EvalAggregate& a) { return a.name != "Input"; });
    auto base = std::find_if(summary.begin(), summary.end(), [](const EvalAggregate& a) { return a.name == "Input"; });
    if (model == summary.end() || base == summary.end()) {
      fail(ErrorCode::decode_failed, fmt::format("'{}' lacks a model or Input row", run));
    }
    EvalAggregate row = *model;
    const fs::path p = fs::path(run).lexically_normal();
    row.name = p.filename().empty() ? p.parent_path().filename().string() : p.filename().string();
    rows.push_back(row);
    if (!input) input = *base;
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const EvalAggregate& a, const EvalAggregate& b) { return a.ssim_B > b.ssim_B; });
  rows.push_back(*input);
  const std::string table = format_table(rows);
  if (!g.out.empty()) {
    const fs::path dir = g.out;
    fs::create_directories(dir);
    std::string csv = "name,ssim_B,psnr_B,ssim_R,psnr_R,miou\n";
    for (const EvalAggregate& r : rows) {
      csv += fmt::format("{},{},{},{},{},{}\n", r.name, r.ssim_B, r.psnr_B, csv_cell(r.ssim_R), csv_cell(r.psnr_R),
                         csv_cell(r.miou));
    }
    write_text(dir / "report.csv", csv);
    write_text(dir / "report.txt", table);
    write_json(dir / "resolved_config.json", {{"command", "report"}, {"runs", runs}});
  }
  out << table;
  return kSuccess;
}

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_config:
    case ErrorCode::invalid_argument:
      return kUsageError;
    default:
      return kRuntimeError;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Semantic-guided single-image reflection removal", "srrn");
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  CLI::Option* seed_opt = app.add_option("--seed", seed, "Seed for all randomness of the command");
  app.add_option("--out", g.out, "Output directory");

  ScenesArgs scenes;
  CLI::App* scenes_cmd = app.add_subcommand("scenes", "Write procedural background/label/reflection sources");
  scenes_cmd->add_option("--backgrounds", scenes.backgrounds, "Number of labeled backgrounds");
  scenes_cmd->add_option("--reflections", scenes.reflections, "Number of reflection sources");
  scenes_cmd->add_option("--size", scenes.size, "Image side in pixels");
  scenes_cmd->add_option("--max-objects", scenes.max_objects, "Objects per background scene");
  scenes_cmd->add_option("--classes", scenes.classes, "Class count including background (0)");

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Blend a synthetic dataset or an alpha sweep");
  synth_cmd->add_option("--backgrounds", synth.backgrounds, "Directory of background images");
  synth_cmd->add_option("--labels", synth.labels, "Directory of label maps (default: ../labels)");
  synth_cmd->add_option("--reflections", synth.reflections, "Directory of reflection images");
  synth_cmd->add_option("--count", synth.count, "Records, or (B, R) pairs for a sweep");
  synth_cmd->add_option("--alpha", synth.alpha, "'fixed A', 'uniform LO:HI' or 'sweep LO:HI:STEP'");
  synth_cmd->add_option("--crop", synth.crop, "Crop side in pixels");
  synth_cmd->add_option("--train-fraction", synth.train_fraction, "Train share of the split (0 leaves unassigned)");
  synth_cmd->add_option("--classes", synth.classes, "Class count of the label maps");

  CLI::App* train_cmd = app.add_subcommand("train", "Train a model from a run configuration");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest split");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Model checkpoint");
  eval_cmd->add_option("--manifest", eval.manifest, "Dataset manifest");
  eval_cmd->add_option("--split", eval.split, "train, val or all");
  eval_cmd->add_flag("--inject-gt", eval.inject_gt, "Guide reconstruction with ground-truth semantic maps");

  AblateArgs ablate;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate ablation variants");
  ablate_cmd->add_option("--specs", ablate.specs, "Ablations to run")->delimiter(',');

  AlphaArgs alpha;
  CLI::App* alpha_cmd = app.add_subcommand("alpha-study", "Per-alpha metrics over a sweep manifest");
  alpha_cmd->add_option("--checkpoint", alpha.checkpoint, "Model checkpoint");
  alpha_cmd->add_option("--manifest", alpha.manifest, "Sweep manifest");
  alpha_cmd->add_option("--ci-level", alpha.ci_level, "Confidence level of the intervals");

  std::vector<std::string> runs;
  CLI::App* report_cmd = app.add_subcommand("report", "Merge evaluation tables of several runs");
  report_cmd->add_option("runs", runs, "Run directories");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (*scenes_cmd) return cmd_scenes(g, scenes, out);
    if (*synth_cmd) return cmd_synth(g, synth, out);
    if (*train_cmd) return cmd_train(g, out);
    if (*eval_cmd) return cmd_eval(g, eval, out);
    if (*ablate_cmd) return cmd_ablate(g, ablate, out);
    if (*alpha_cmd) return cmd_alpha_study(g, alpha, out);
    if (*report_cmd) return cmd_report(g, runs, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace srrn::cli
