#include <gtest/gtest.h>

#include <tuple>

#include "srrn/error.hpp"
#include "srrn/model.hpp"
#include "support/fixtures.hpp"

namespace srrn {
namespace {

using testing::random_image;

ModelConfig small(FusionVariant v, int classes = 4) {
  ModelConfig c = testing::toy_model_config(classes, 3);
  c.encoder_blocks = {{8, 1}, {8, 2}, {12, 2}};
  c.aspp_width = 8;
  c.semantic_width = 8;
  c.decoder_widths = {8, 8};
  c.variant = v;
  return c;
}

// Sum(B^) gradient for every parameter.
std::vector<double> background_grad_norms(Model& m, const ImageTensor& img) {
  m.zero_grad();
  const GraphOutput g = m.forward_graph(to_batch(img));
  const std::pair<ag::Var, ag::Tensor> seed{g.background, ag::Tensor(g.background->value.shape(), 1.0)};
  ag::backward(std::span(&seed, 1));
  std::vector<double> norms;
  for (const Parameter& p : m.parameters()) {
    double s = 0;
    for (double v : p.var->grad.data()) s += std::abs(v);
    norms.push_back(s);
  }
  return norms;
}

TEST(FusionVariant, Names) {
  for (FusionVariant v : {FusionVariant::basic_guidance, FusionVariant::shared_no_fusion, FusionVariant::full_fusion}) {
    EXPECT_EQ(parse_fusion_variant(to_string(v)), v);
  }
  EXPECT_THROW(parse_fusion_variant("late"), Error);
}

TEST(ModelConfig, Validation) {
  ModelConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.total_stride(), 4);
  EXPECT_EQ(c.stage_stride(1), 2);
  auto expect_invalid = [](ModelConfig bad) {
    try {
      bad.validate();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::invalid_config);
    }
  };
  ModelConfig bad = c;
  bad.encoder_blocks[1].stride = 3;
  expect_invalid(bad);
  bad = c;
  bad.class_count = 1;
  expect_invalid(bad);
  bad = c;
  bad.skip_stage_ids = {7};
  expect_invalid(bad);
  bad = c;
  bad.decoder_widths = {32};
  expect_invalid(bad);
  bad = c;
  bad.fusion_stage = 2;
  expect_invalid(bad);
  bad = c;
  bad.aspp_rates = {0};
  expect_invalid(bad);
}

TEST(Model, ParameterCountMatchesHandCount) {
  const ModelConfig c;  // 4 encoder stages, widths 16/32/64/64
  const auto conv = [](int in, int out, int k) { return static_cast<std::size_t>(out * in * k * k + out); };
  // (in, out, kernel) of every convolution in the default layout.
  const std::vector<std::tuple<int, int, int>> layers{
      {3, 16, 3},  {16, 16, 3}, {3, 16, 1},                           // encoder.0
      {16, 32, 3}, {32, 32, 3}, {16, 32, 1},                          // encoder.1
      {32, 64, 3}, {64, 64, 3}, {32, 64, 1},                          // encoder.2
      {64, 64, 3}, {64, 64, 3},                                       // encoder.3
      {64, 32, 1}, {64, 32, 3}, {64, 32, 3}, {64, 32, 1}, {128, 32, 1},  // aspp rates 1,2,3 + pool + project
      {32, 32, 3}, {32, 21, 1},                                       // semantic head
      {32 + 32 + 21, 32, 3}, {32, 32, 3},                             // decoder.0: aspp + skip 1 + guidance
      {32 + 16 + 3, 16, 3}, {16, 16, 3},                              // decoder.1: prior + skip 0 + input
      {16, 3, 3}, {16, 3, 3}};                                        // heads
  std::size_t expected = 0;
  for (auto [in, out, k] : layers) expected += conv(in, out, k);
  const Model m(c);
  EXPECT_EQ(expected, 248123u);
  EXPECT_EQ(m.parameter_count(), expected);
  EXPECT_EQ(m.parameters().size(), 2 * layers.size());
  EXPECT_EQ(m.trainable_parameter_count(), expected);
}

TEST(Model, BasicGuidanceAddsSeparateExtractor) {
  ModelConfig c;
  const std::size_t shared = Model(c).parameter_count();
  c.variant = FusionVariant::basic_guidance;
  const Model m(c);
  EXPECT_EQ(m.parameter_count(), shared + 148656u + 45216u);
  EXPECT_NE(m.find("semantic_encoder.0.a.weight"), nullptr);
  c.variant = FusionVariant::shared_no_fusion;
  EXPECT_EQ(Model(c).parameter_count(), shared - 21u * 32u * 9u);
}

TEST(Model, DeterministicInitialization) {
  const Model a(small(FusionVariant::full_fusion)), b(small(FusionVariant::full_fusion));
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_EQ(a.parameters()[i].var->value, b.parameters()[i].var->value);
  }
  ModelConfig other = small(FusionVariant::full_fusion);
  other.seed = 4;
  EXPECT_NE(Model(other).parameters()[0].var->value, a.parameters()[0].var->value);
}

TEST(Model, FreezeEncoderExcludesEncoder) {
  ModelConfig c = small(FusionVariant::basic_guidance);
  c.freeze_encoder = true;
  const Model m(c);
  std::size_t frozen = 0;
  for (const Parameter& p : m.parameters()) {
    const bool enc = p.role == ParamRole::encoder || p.role == ParamRole::semantic_encoder;
    EXPECT_EQ(p.trainable, !enc) << p.name;
    if (!p.trainable) frozen += p.var->value.size();
  }
  EXPECT_GT(frozen, 0u);
  EXPECT_EQ(m.trainable_parameter_count() + frozen, m.parameter_count());
}

TEST(Model, OutputShapes) {
  ModelConfig c;
  const Model m(c);
  const ModelOutput o = m.forward(random_image(32, 24, 1));
  EXPECT_EQ(o.semantic_logits.classes(), 21);
  EXPECT_EQ(o.semantic_logits.height(), 32);
  EXPECT_EQ(o.semantic_logits.width(), 24);
  EXPECT_EQ(o.background.height(), 32);
  EXPECT_EQ(o.reflection.width(), 24);
  EXPECT_THROW(m.forward(random_image(30, 24, 1)), Error);
}

TEST(Model, FullSizeShapeContract) {
  const Model m(small(FusionVariant::full_fusion, kClassCount));
  const ModelOutput o = m.forward(random_image(256, 256, 2));
  EXPECT_EQ(o.semantic_logits.classes(), kClassCount);
  EXPECT_EQ(o.semantic_logits.height(), 256);
  EXPECT_EQ(o.background.height(), 256);
  EXPECT_EQ(o.reflection.width(), 256);
}

TEST(Model, DeterministicAndBounded) {
  const Model m(small(FusionVariant::full_fusion));
  const ImageTensor img = random_image(16, 16, 3);
  const ModelOutput a = m.forward(img), b = m.forward(img);
  EXPECT_EQ(a.background, b.background);
  EXPECT_EQ(a.reflection, b.reflection);
  EXPECT_EQ(a.semantic_logits.scores(), b.semantic_logits.scores());
  for (double v : a.background.data()) EXPECT_TRUE(v >= 0.0 && v <= 1.0);

  // Extreme parameters still give bounded outputs.
  Model wild = m.clone();
  for (Parameter& p : wild.parameters()) {
    for (double& v : p.var->value.data()) v *= 50.0;
  }
  const ModelOutput w = wild.forward(img);
  for (double v : w.background.data()) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  for (double v : w.reflection.data()) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
}

TEST(Model, CloneIsIndependentCopyShares) {
  Model m(small(FusionVariant::full_fusion));
  Model shared = m;
  Model cloned = m.clone();
  m.parameters()[0].var->value[0] += 1.0;
  EXPECT_EQ(shared.parameters()[0].var->value, m.parameters()[0].var->value);
  EXPECT_NE(cloned.parameters()[0].var->value, m.parameters()[0].var->value);
}

TEST(Wiring, SharedNoFusionIgnoresSemanticParameters) {
  Model m(small(FusionVariant::shared_no_fusion));
  const ImageTensor img = random_image(16, 16, 4);
  const ModelOutput before = m.forward(img);
  for (Parameter& p : m.parameters()) {
    if (m.semantic_exclusive(p)) {
      for (double& v : p.var->value.data()) v += 0.37;
    }
  }
  const ModelOutput after = m.forward(img);
  EXPECT_EQ(before.background, after.background);
  EXPECT_EQ(before.reflection, after.reflection);
  EXPECT_NE(before.semantic_logits.scores(), after.semantic_logits.scores());

  const auto norms = background_grad_norms(m, img);
  for (std::size_t i = 0; i < norms.size(); ++i) {
    if (m.semantic_exclusive(m.parameters()[i])) EXPECT_EQ(norms[i], 0.0) << m.parameters()[i].name;
  }
}

TEST(Wiring, FusionVariantsPropagateIntoSemanticBranch) {
  for (FusionVariant v : {FusionVariant::full_fusion, FusionVariant::basic_guidance}) {
    Model m(small(v));
    const ImageTensor img = random_image(16, 16, 5);
    const auto norms = background_grad_norms(m, img);
    bool any = false;
    for (std::size_t i = 0; i < norms.size(); ++i) any |= m.semantic_exclusive(m.parameters()[i]) && norms[i] > 0.0;
    EXPECT_TRUE(any) << to_string(v);
  }
}

TEST(Wiring, BasicGuidanceSeparatesExtractors) {
  Model m(small(FusionVariant::basic_guidance));
  const ImageTensor img = random_image(16, 16, 6);
  const ModelOutput before = m.forward(img);
  for (Parameter& p : m.parameters()) {
    if (p.role == ParamRole::encoder || p.role == ParamRole::aspp) {
      for (double& v : p.var->value.data()) v *= 1.5;
    }
  }
  EXPECT_EQ(m.forward(img).semantic_logits.scores(), before.semantic_logits.scores());
}

TEST(InjectSemantic, OwnPredictionReproducesForward) {
  Model m(small(FusionVariant::full_fusion));
  // Sharpen the classifier so the predicted softmax is numerically one-hot.
  for (Parameter& p : m.parameters()) {
    if (p.name.starts_with("semantic.logits")) {
      for (double& v : p.var->value.data()) v *= 1e4;
    }
  }
  const ImageTensor img = random_image(16, 16, 7);
  const ModelOutput f = m.forward(img);
  const ModelOutput inj = m.inject_semantic(img, f.semantic_logits.argmax());
  for (std::size_t i = 0; i < f.background.data().size(); ++i) {
    EXPECT_NEAR(f.background.data()[i], inj.background.data()[i], 1e-9);
    EXPECT_NEAR(f.reflection.data()[i], inj.reflection.data()[i], 1e-9);
  }
  EXPECT_EQ(inj.semantic_logits.scores(), f.semantic_logits.scores());
}

TEST(InjectSemantic, SoftmaxGuidanceIsForward) {
  const Model m(small(FusionVariant::full_fusion));
  const ImageTensor img = random_image(16, 16, 8);
  const ModelOutput f = m.forward(img);
  const Planes probs = f.semantic_logits.probabilities();
  ag::Tensor guidance({1, probs.channels(), 16, 16}, std::vector<double>(probs.data().begin(), probs.data().end()));
  ag::NoGradGuard g;
  const GraphOutput out = m.forward_graph(to_batch(img), &guidance);
  EXPECT_EQ(image_from_batch(out.background->value, 0), f.background);
}

TEST(InjectSemantic, Contract) {
  const Model m(small(FusionVariant::full_fusion));
  const ImageTensor img = random_image(16, 16, 9);
  const ModelOutput inj = m.inject_semantic(img, testing::random_labels(16, 16, 4, 1));
  EXPECT_EQ(inj.background.height(), 16);
  EXPECT_EQ(inj.semantic_logits.classes(), 4);
  try {
    m.inject_semantic(img, SemanticMap(16, 16, kIgnoreLabel));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("no valid guidance labels"), std::string::npos);
  }
  EXPECT_THROW(m.inject_semantic(img, SemanticMap(8, 8, 0)), Error);
}

TEST(ResidualBackground, UntrainedModelStartsNearIdentity) {
  const Model m(small(FusionVariant::full_fusion));
  const ImageTensor img = random_image(16, 16, 10);
  const ModelOutput o = m.forward(img);
  double err = 0;
  for (std::size_t i = 0; i < img.data().size(); ++i) err += std::abs(o.background.data()[i] - img.data()[i]);
  EXPECT_LT(err / static_cast<double>(img.data().size()), 0.1);
}

TEST(Model, SummaryListsParameters) {
  const Model m(small(FusionVariant::full_fusion));
  const std::string s = m.summary();
  EXPECT_NE(s.find("encoder.0.a.weight"), std::string::npos);
  EXPECT_NE(s.find("head.background.bias"), std::string::npos);
}

}  // namespace
}  // namespace srrn
