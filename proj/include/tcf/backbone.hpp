#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tcf/layers.hpp"

namespace tcf {

/// Everything a forward pass records: the post-stage token sets and the
/// clustering record of each CTM (clusters[s] maps stage s onto stage s+1).
struct TokenPyramid {
  std::vector<TokenSet> stages;
  std::vector<ClusterResult> clusters;
  std::size_t image_h = 0, image_w = 0;
  std::size_t stem_h = 0, stem_w = 0;
  std::uint64_t attention_macs = 0;
  std::uint64_t dist_ops = 0;
};

/// Weight specs for the backbone, classification head and MTA, in a fixed order.
std::vector<WeightSpec> model_weight_specs(const ModelConfig& config);

/// Deterministic fixture weights for `config`.
WeightStore generate_model_weights(const ModelConfig& config, std::uint64_t seed);

CtmConfig ctm_config(const ModelConfig& config, int ctm_index);
BlockConfig stage_block_config(const ModelConfig& config, int stage);

/// A config bound to resolved weights. Construction fails with one error
/// listing every missing or misshapen tensor.
class Model {
 public:
  Model(ModelConfig config, const WeightStore& store);

  const ModelConfig& config() const { return config_; }
  const MtaWeights& mta_weights() const { return mta_; }

  TokenSet stem(const Tensor& image) const;

  /// stem -> stage blocks -> CTM -> ... -> stage-4 blocks.
  TokenPyramid forward(const Tensor& image, RunContext* ctx = nullptr) const;

  /// Layer norm, mean over the final-stage tokens, linear head.
  std::vector<float> classify(const TokenPyramid& pyramid) const;

 private:
  ModelConfig config_;
  StemWeights stem_;
  std::array<std::vector<BlockWeights>, kNumStages> blocks_;
  std::array<CtmWeights, kNumStages - 1> ctm_;
  HeadWeights head_;
  MtaWeights mta_;
};

TokenPyramid forward(const Tensor& image, const ModelConfig& config, const WeightStore& store);

/// Mean-token head on its own: LN, mean over tokens, x W + b.
std::vector<float> classify(const TokenSet& final_tokens, const HeadWeights& head, float eps = 1e-6f);

}  // namespace tcf
