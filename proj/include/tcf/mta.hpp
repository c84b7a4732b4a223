#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tcf/backbone.hpp"

namespace tcf {

/// maps[s][t] is the final-stage cluster of stage-s token t.
struct ComposedAssignment {
  std::vector<std::vector<std::int32_t>> maps;
  std::size_t num_final = 0;
};

/// Chains the recorded CTM assignments from every stage to the last one.
ComposedAssignment compose_assignments(const TokenPyramid& pyramid);

enum class MtaVariant { SR, CR };

/// Stride 4/8/16/32 maps, all with the same channel count.
struct FeaturePyramid {
  std::array<Tensor, kNumStages> levels;
};

struct MtaOutput {
  FeaturePyramid pyramid;
  std::array<TokenSet, kNumStages> steps;  // aggregated tokens per stage
  ComposedAssignment composed;
  std::array<std::size_t, kNumStages> kv_tokens{};  // key/value count used by each level's block
};

/// Upsample the deeper tokens through `record`, add the lateral tokens and
/// run one transformer block. `composed` is only read in CR mode.
TokenSet aggregation_step(const TokenSet& deep, const ClusterResult& record, const TokenSet& lateral,
                          const BlockWeights& block, const BlockConfig& cfg, std::span<const std::int32_t> composed,
                          std::size_t num_final, RunContext* ctx = nullptr, const std::string& name = "mta.block");

/// Deep-to-shallow token aggregation. Every stage's tokens are projected to
/// the MTA width; the final stage goes through one block, then each
/// shallower stage takes the upsampled result plus its lateral tokens through
/// another. Each step is rendered at its stage's nominal grid.
MtaOutput mta_forward(const TokenPyramid& pyramid, MtaVariant variant, const MtaWeights& weights,
                      const ModelConfig& config, RunContext* ctx = nullptr);

}  // namespace tcf
