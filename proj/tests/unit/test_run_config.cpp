#include <gtest/gtest.h>

#include <fstream>

#include "srrn/error.hpp"
#include "srrn/run_config.hpp"
#include "support/fixtures.hpp"

namespace srrn {
namespace {

void expect_config_error(const std::string& text, const std::string& needle) {
  try {
    parse_run_config(text);
    FAIL() << "accepted: " << text;
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_config);
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(RunConfig, DefaultsAndOverrides) {
  const RunConfigFile c = parse_run_config(R"({
    "seed": 5,
    "dataset": {"manifest": "data/manifest.json"},
    "model": {"encoder_blocks": [{"width": 8, "stride": 1}, {"width": 8, "stride": 2}],
              "aspp_rates": [1], "decoder_widths": [8], "skip_stage_ids": [0], "class_count": 6,
              "variant": "shared_no_fusion"},
    "loss": {"w4": 1e-5, "sigma_mode": "learnable"},
    "train": {"momentum": 0.9, "max_steps": 12, "crop": 16}
  })",
                                           "/runs/a");
  const TrainConfig& t = c.train;
  EXPECT_EQ(t.manifest, std::filesystem::path("/runs/a/data/manifest.json"));
  EXPECT_EQ(t.seed, 5u);
  EXPECT_EQ(t.model.seed, 5u);
  EXPECT_EQ(t.model.encoder_blocks.size(), 2u);
  EXPECT_EQ(t.model.variant, FusionVariant::shared_no_fusion);
  EXPECT_EQ(t.weights.w4, 1e-5);
  EXPECT_EQ(t.weights.w1_1, 0.6);
  EXPECT_EQ(t.weights.sigma_mode, SigmaMode::learnable);
  EXPECT_EQ(t.momentum, 0.9);
  EXPECT_EQ(t.lr_init, 0.007);
  EXPECT_EQ(t.max_steps, 12);
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfigFile c = parse_run_config(R"({"dataset": {"manifest": "/abs/m.json"}, "seed": 3})");
  const RunConfigFile back = parse_run_config(run_config_to_json(c));
  EXPECT_EQ(back.train, c.train);
  EXPECT_EQ(run_config_to_json(back), run_config_to_json(c));
}

TEST(RunConfig, UnknownKeysAreErrors) {
  expect_config_error(R"({"dataset": {"manifest": "m"}, "trian": {}})", "'trian': unknown key");
  expect_config_error(R"({"dataset": {"manifest": "m"}, "train": {"lr": 0.1}})", "'train.lr': unknown key");
  expect_config_error(R"({"dataset": {"manifest": "m"}, "model": {"encoder_blocks": [{"width": 4, "strid": 1}]}})",
                      "model.encoder_blocks[0].strid");
}

TEST(RunConfig, MissingManifestNamesKey) {
  expect_config_error(R"({"seed": 1})", "dataset.manifest");
  expect_config_error(R"({"dataset": {}})", "dataset.manifest");
}

TEST(RunConfig, TypeAndValueErrors) {
  expect_config_error(R"({"dataset": {"manifest": "m"}, "train": {"max_steps": "ten"}})", "train.max_steps");
  expect_config_error(R"({"dataset": {"manifest": "m"}, "model": {"variant": "late"}})", "model.variant");
  expect_config_error(R"({"dataset": {"manifest": "m"}, "train": {"momentum": 1.5}})", "momentum");
  expect_config_error(R"({"dataset": {"manifest": "m"}, "schema_version": 2})", "schema_version");
  expect_config_error("{ nope", "not valid JSON");
  expect_config_error(R"({"dataset": {"manifest": "m"}, "seed": -1})", "seed");
}

TEST(RunConfig, LoadResolvesRelativeToFile) {
  testing::TempDir dir("cfg");
  std::filesystem::create_directories(dir / "sub");
  std::ofstream(dir / "sub/run.json") << R"({"dataset": {"manifest": "../data/m.json"}})";
  const RunConfigFile c = load_run_config(dir / "sub/run.json");
  EXPECT_EQ(c.train.manifest, (dir / "data/m.json").lexically_normal());
  echo_run_config(c, dir / "out");
  EXPECT_EQ(testing::read_file(dir / "out/resolved_config.json"), run_config_to_json(c));
  EXPECT_THROW(load_run_config(dir / "missing.json"), Error);
}

TEST(ModelConfigJson, RoundTrip) {
  ModelConfig m = testing::toy_model_config(6, 99);
  m.freeze_encoder = true;
  EXPECT_EQ(model_config_from_json(model_config_to_json(m)), m);
}

}  // namespace
}  // namespace srrn
