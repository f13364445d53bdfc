#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "srrn/cli.hpp"
#include "srrn/manifest.hpp"
#include "srrn/trainer.hpp"
#include "support/fixtures.hpp"

namespace srrn {
namespace {

using testing::TempDir;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(SRRN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Sources, dataset and a tiny run config shared by the CLI tests.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    const std::string d = dir_->path().string();
    ASSERT_EQ(run_cli({"scenes", "--out", d + "/src", "--backgrounds", "6", "--reflections", "6", "--size", "24",
                       "--classes", "4", "--seed", "3"})
                  .code,
              0);
    ASSERT_EQ(run_cli({"synth", "--out", d + "/data", "--backgrounds", d + "/src/backgrounds", "--reflections",
                       d + "/src/reflections", "--count", "10", "--alpha", "uniform 0.1:0.5", "--crop", "16",
                       "--classes", "4", "--seed", "4"})
                  .code,
              0);
    write_config("run.json", 4);
    write_config("zero.json", 0);
  }
  static void TearDownTestSuite() { delete dir_; }

  static void write_config(const std::string& name, int steps, const std::string& manifest = "data/manifest.json") {
    nlohmann::json doc = {
        {"seed", 1},
        {"dataset", {{"manifest", manifest}}},
        {"model",
         {{"encoder_blocks", {{{"width", 6}, {"stride", 1}}, {{"width", 8}, {"stride", 2}}}},
          {"aspp_rates", {1}},
          {"aspp_width", 8},
          {"semantic_width", 6},
          {"class_count", 4},
          {"decoder_widths", {6}},
          {"skip_stage_ids", {0}}}},
        {"loss", {{"w4", 1e-5}}},
        {"train", {{"momentum", 0.9}, {"lr_init", 0.005}, {"max_steps", steps}, {"crop", 16}}}};
    std::ofstream(dir_->path() / name) << doc.dump(2);
  }

  static std::string path(const std::string& p) { return (dir_->path() / p).string(); }

  static TempDir* dir_;
};

TempDir* CliTest::dir_ = nullptr;

TEST_F(CliTest, SynthWritesSplitManifestAndHistogram) {
  const DatasetManifest m = load_manifest(path("data/manifest.json"));
  EXPECT_EQ(m.records.size(), 10u);
  EXPECT_EQ(m.count(Split::train), 8u);
  EXPECT_EQ(m.class_count, 4);
  EXPECT_TRUE(validate_manifest(m).empty());
  EXPECT_TRUE(std::filesystem::exists(path("data/resolved_config.json")));

  const Result r = run_cli({"synth", "--out", path("data2"), "--backgrounds", path("src/backgrounds"),
                            "--reflections", path("src/reflections"), "--count", "10", "--alpha", "uniform 0.1:0.5",
                            "--crop", "16", "--classes", "4", "--seed", "4"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("10 records"), std::string::npos);
  EXPECT_NE(r.out.find("alpha histogram"), std::string::npos);
  EXPECT_EQ(testing::read_file(path("data/manifest.json")), testing::read_file(path("data2/manifest.json")));
}

TEST_F(CliTest, SynthSweepCardinality) {
  const Result r = run_cli({"synth", "--out", path("sweep"), "--backgrounds", path("src/backgrounds"),
                            "--reflections", path("src/reflections"), "--count", "3", "--alpha", "sweep 0.1:0.9:0.1",
                            "--crop", "16", "--classes", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_manifest(path("sweep/manifest.json")).records.size(), 27u);
}

TEST_F(CliTest, SynthUsageErrors) {
  EXPECT_EQ(run_cli({"synth", "--out", path("x"), "--backgrounds", path("src/backgrounds"), "--reflections",
                     path("src/reflections"), "--alpha", "gaussian"})
                .code,
            1);
  EXPECT_EQ(run_cli({"synth", "--out", path("x")}).code, 1);
  EXPECT_EQ(run_cli({"synth", "--out", path("x"), "--backgrounds", path("nope"), "--reflections", path("nope")}).code,
            2);
}

TEST_F(CliTest, TrainZeroStepsWritesInitCheckpoint) {
  const Result r = run_cli({"train", "--config", path("zero.json"), "--out", path("run0")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(path("run0/model.ckpt")));
  EXPECT_TRUE(std::filesystem::exists(path("run0/resolved_config.json")));
  EXPECT_TRUE(read_loss_log(path("run0/loss_log.csv")).empty());
}

TEST_F(CliTest, TrainEvalReportPipeline) {
  ASSERT_EQ(run_cli({"train", "--config", path("run.json"), "--out", path("run")}).code, 0);
  EXPECT_EQ(read_loss_log(path("run/loss_log.csv")).size(), 4u);

  const Result e = run_cli({"eval", "--config", path("run.json"), "--checkpoint", path("run/model.ckpt"), "--out",
                            path("run/eval")});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("Input"), std::string::npos);
  const auto summary = read_eval_summary(path("run/eval"));

  const Result rep = run_cli({"report", path("run/eval"), "--out", path("report")});
  ASSERT_EQ(rep.code, 0) << rep.err;
  const std::string csv = testing::read_file(path("report/report.csv"));
  std::istringstream lines(csv);
  std::string header, row, base;
  std::getline(lines, header);
  std::getline(lines, row);
  std::getline(lines, base);
  EXPECT_EQ(header, "name,ssim_B,psnr_B,ssim_R,psnr_R,miou");
  EXPECT_EQ(row.substr(0, row.find(',')), "eval");
  EXPECT_NE(row.find(fmt::format("{}", summary[0].ssim_B)), std::string::npos);
  EXPECT_EQ(base.substr(0, base.find(',')), "Input");
  EXPECT_TRUE(std::filesystem::exists(path("report/resolved_config.json")));
}

TEST_F(CliTest, ReportSortsBySsimDescending) {
  ASSERT_EQ(run_cli({"train", "--config", path("zero.json"), "--out", path("ra")}).code, 0);
  ASSERT_EQ(run_cli({"eval", "--manifest", path("data/manifest.json"), "--checkpoint", path("ra/model.ckpt"), "--out",
                     path("ra/eval")})
                .code,
            0);
  ASSERT_EQ(run_cli({"eval", "--manifest", path("data/manifest.json"), "--checkpoint", path("ra/model.ckpt"),
                     "--split", "train", "--out", path("ra/eval_train")})
                .code,
            0);
  const Result r = run_cli({"report", path("ra/eval"), path("ra/eval_train")});
  ASSERT_EQ(r.code, 0) << r.err;
  const double a = read_eval_summary(path("ra/eval"))[0].ssim_B;
  const double b = read_eval_summary(path("ra/eval_train"))[0].ssim_B;
  const auto pa = r.out.find("eval "), pb = r.out.find("eval_train");
  ASSERT_NE(pa, std::string::npos);
  ASSERT_NE(pb, std::string::npos);
  EXPECT_EQ(a >= b, pa < pb);
  EXPECT_GT(r.out.find("Input"), std::max(pa, pb));
}

TEST_F(CliTest, AblateAndAlphaStudy) {
  const Result a = run_cli({"ablate", "--config", path("zero.json"), "--specs", "full,no_edge_term", "--out",
                            path("abl")});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_TRUE(std::filesystem::exists(path("abl/full/eval_summary.json")));
  EXPECT_TRUE(std::filesystem::exists(path("abl/no_edge_term/resolved_config.json")));
  const std::string table = testing::read_file(path("abl/ablation_table.txt"));
  EXPECT_NE(table.find("full"), std::string::npos);
  EXPECT_NE(table.find("no_edge_term"), std::string::npos);
  EXPECT_EQ(run_cli({"ablate", "--config", path("zero.json"), "--specs", "bogus", "--out", path("abl2")}).code, 1);

  ASSERT_EQ(run_cli({"synth", "--out", path("sweep9"), "--backgrounds", path("src/backgrounds"), "--reflections",
                     path("src/reflections"), "--count", "2", "--alpha", "sweep 0.1:0.9:0.1", "--crop", "16",
                     "--classes", "4"})
                .code,
            0);
  const Result s = run_cli({"alpha-study", "--checkpoint", path("abl/full/model.ckpt"), "--manifest",
                            path("sweep9/manifest.json"), "--out", path("study")});
  ASSERT_EQ(s.code, 0) << s.err;
  const std::string series = testing::read_file(path("study/series_miou.csv"));
  EXPECT_EQ(std::count(series.begin(), series.end(), '\n'), 10);
  EXPECT_TRUE(std::filesystem::exists(path("study/resolved_config.json")));
}

TEST_F(CliTest, ConfigErrorsExitOne) {
  write_config("bad_key.json", 1);
  {
    nlohmann::json doc = nlohmann::json::parse(testing::read_file(path("bad_key.json")));
    doc["train"]["learning_rate"] = 0.1;
    std::ofstream(path("bad_key.json")) << doc.dump();
  }
  Result r = run_cli({"train", "--config", path("bad_key.json"), "--out", path("bad")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("train.learning_rate"), std::string::npos);

  std::ofstream(path("no_manifest.json")) << R"({"seed": 1})";
  r = run_cli({"train", "--config", path("no_manifest.json"), "--out", path("bad")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("dataset.manifest"), std::string::npos);

  EXPECT_EQ(run_cli({"train", "--out", path("bad")}).code, 1);
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
  EXPECT_EQ(run_cli({"eval", "--out", path("bad"), "--checkpoint", "x", "--split", "test", "--manifest", "m"}).code, 1);
}

TEST_F(CliTest, RuntimeErrorsExitTwo) {
  write_config("missing_data.json", 1, "nowhere/manifest.json");
  EXPECT_EQ(run_cli({"train", "--config", path("missing_data.json"), "--out", path("bad")}).code, 2);
  EXPECT_EQ(run_cli({"eval", "--manifest", path("data/manifest.json"), "--checkpoint", path("none.ckpt"), "--out",
                     path("bad")})
                .code,
            2);

  nlohmann::json doc = nlohmann::json::parse(testing::read_file(path("run.json")));
  doc["train"]["lr_init"] = 1e300;
  doc["train"]["momentum"] = 0.0;
  std::ofstream(path("explode.json")) << doc.dump();
  const Result r = run_cli({"train", "--config", path("explode.json"), "--out", path("explode")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("non-finite"), std::string::npos);
}

TEST_F(CliTest, BinaryExitCodes) {
  EXPECT_EQ(run_binary("--help"), 0);
  EXPECT_EQ(run_binary(""), 1);
  std::ofstream(path("bin_no_manifest.json")) << R"({"seed": 1})";
  EXPECT_EQ(run_binary("train --config " + path("bin_no_manifest.json") + " --out " + path("bad")), 1);
  EXPECT_EQ(run_binary("train --config " + path("zero.json") + " --out " + path("bin_run")), 0);
  EXPECT_EQ(run_binary("eval --manifest " + path("data/manifest.json") + " --checkpoint " + path("none.ckpt") +
                       " --out " + path("bad")),
            2);
}

TEST_F(CliTest, TrainIsIdempotent) {
  ASSERT_EQ(run_cli({"train", "--config", path("run.json"), "--out", path("idem_a")}).code, 0);
  ASSERT_EQ(run_cli({"train", "--config", path("run.json"), "--out", path("idem_b")}).code, 0);
  for (const char* f : {"loss_log.csv", "model.ckpt"}) {
    EXPECT_EQ(testing::read_file(path(std::string("idem_a/") + f)), testing::read_file(path(std::string("idem_b/") + f)));
  }
  // The echoed config differs only through the out directory, which it does not record.
  EXPECT_EQ(testing::read_file(path("idem_a/resolved_config.json")),
            testing::read_file(path("idem_b/resolved_config.json")));
}

}  // namespace
}  // namespace srrn
