#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srrn/autograd.hpp"
#include "srrn/core_data.hpp"

namespace srrn {

/// How the semantic branch feeds the reconstruction branch.
///  - basic_guidance:   separate feature extractors; the predicted semantic map is
///                      merged into the reconstruction branch.
///  - shared_no_fusion: shared feature extractor, independent task heads.
///  - full_fusion:      shared feature extractor and semantic guidance.
enum class FusionVariant { basic_guidance, shared_no_fusion, full_fusion };
std::string_view to_string(FusionVariant v);
FusionVariant parse_fusion_variant(std::string_view s);

struct EncoderStage {
  int width = 16;
  int stride = 1;
  friend bool operator==(const EncoderStage&, const EncoderStage&) = default;
};

struct ModelConfig {
  std::vector<EncoderStage> encoder_blocks{{16, 1}, {32, 2}, {64, 2}, {64, 1}};
  std::vector<int> aspp_rates{1, 2, 3};
  int aspp_width = 32;
  int semantic_width = 32;
  int class_count = kClassCount;
  std::vector<int> decoder_widths{32, 16};
  std::vector<int> skip_stage_ids{0, 1};
  FusionVariant variant = FusionVariant::full_fusion;
  /// Decoder stage whose input receives the semantic guidance planes.
  int fusion_stage = 0;
  /// Concatenate the input image ahead of the last decoder stage.
  bool input_skip = true;
  /// B^ = sigmoid(logit(I) + head), so an untrained model starts near the identity.
  bool residual_background = true;
  bool freeze_encoder = false;
  std::uint64_t seed = 0;

  /// Throws invalid_config on inconsistent settings.
  void validate() const;
  /// Product of encoder strides.
  int total_stride() const;
  /// Output stride of encoder stage i.
  int stage_stride(int stage) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class ParamRole { encoder, semantic_encoder, aspp, semantic_aspp, semantic_head, decoder, output_head };
std::string_view to_string(ParamRole r);

struct Parameter {
  std::string name;
  ag::Var var;
  ParamRole role;
  bool trainable = true;
};

struct ModelOutput {
  SemanticLogits semantic_logits;
  ImageTensor background;
  ImageTensor reflection;
};

/// Graph-level outputs for a batch; see Model::forward_graph.
struct GraphOutput {
  ag::Var logits;      ///< [n, classes, H, W]
  ag::Var background;  ///< [n, 3, H, W] in (0, 1)
  ag::Var reflection;  ///< [n, 3, H, W] in (0, 1)
};

ag::Tensor to_batch(std::span<const ImageTensor> images);
ag::Tensor to_batch(const ImageTensor& image);
ImageTensor image_from_batch(const ag::Tensor& t, int n);
Planes planes_from_batch(const ag::Tensor& t, int n);
SemanticLogits logits_from_batch(const ag::Tensor& t, int n);

/// One-hot planes [1, classes, H, W]; ignore pixels get all-zero planes.
/// Throws invalid_label when no pixel carries a valid label.
ag::Tensor one_hot_guidance(const SemanticMap& map, int classes);

/// Multi-task network: residual feature extractor, atrous spatial pyramid pooling,
/// semantic head, and a decoder with skip connections emitting B^ and R^.
/// Copies share parameters; use clone() for an independent copy.
class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  std::vector<Parameter>& parameters() noexcept { return params_; }
  const Parameter* find(std::string_view name) const;

  std::size_t parameter_count() const;
  std::size_t trainable_parameter_count() const;
  /// Parameters that only the semantic branch uses.
  bool semantic_exclusive(const Parameter& p) const;
  std::string summary() const;

  /// Builds the computation graph for a batch [n, 3, H, W]. With `guidance`
  /// ([n, classes, H, W] probability planes), the reconstruction branch consumes it
  /// in place of the predicted softmax planes.
  GraphOutput forward_graph(const ag::Tensor& images, const ag::Tensor* guidance = nullptr) const;

  ModelOutput forward(const ImageTensor& image) const;
  /// Reconstruction guided by the given map (one-hot) instead of the predicted one.
  ModelOutput inject_semantic(const ImageTensor& image, const SemanticMap& semantic) const;

  void zero_grad();
  Model clone() const;

 private:
  struct Conv {
    std::size_t weight;
    std::size_t bias;
    ag::Conv2dOptions options;
  };
  struct Block {
    Conv a, b;
    std::optional<Conv> shortcut;
  };
  struct Encoder {
    std::vector<Block> stages;
  };
  struct Aspp {
    std::vector<Conv> branches;
    Conv pooled;
    Conv project;
  };
  struct DecoderStage {
    Conv a, b;
  };

  Conv add_conv(const std::string& name, ParamRole role, int in, int out, int kernel, ag::Conv2dOptions options,
                double gain);
  Encoder build_encoder(const std::string& prefix, ParamRole role);
  Aspp build_aspp(const std::string& prefix, ParamRole role, int in);
  ag::Var apply(const Conv& c, const ag::Var& x) const;
  std::vector<ag::Var> run_encoder(const Encoder& e, const ag::Var& x) const;
  ag::Var run_aspp(const Aspp& a, const ag::Var& x) const;
  void check_input(int height, int width) const;
  ModelOutput unpack(const GraphOutput& g) const;

  ModelConfig config_;
  std::vector<Parameter> params_;
  std::uint64_t init_stream_ = 0;

  Encoder encoder_;
  Aspp aspp_;
  std::optional<Encoder> semantic_encoder_;
  std::optional<Aspp> semantic_aspp_;
  Conv semantic_hidden_{};
  Conv semantic_logits_{};
  std::vector<DecoderStage> decoder_;
  Conv background_head_{};
  Conv reflection_head_{};
};

}  // namespace srrn
