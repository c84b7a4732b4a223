#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tcf/clustering.hpp"
#include "tcf/config.hpp"
#include "tcf/token_ops.hpp"
#include "tcf/weights.hpp"

namespace tcf {

struct LinearWeights {
  Tensor w;  // in x out
  Tensor b;  // out
  Tensor operator()(const Tensor& x) const { return linear(x, w, b); }
};

struct NormWeights {
  Tensor gamma;
  Tensor beta;
};

struct AttentionWeights {
  LinearWeights q, k, v, proj;
  bool has_sr = false;
  Tensor sr_w, sr_b;  // C x C x r x r, C
  NormWeights sr_norm;
};

/// fc1 -> depthwise 3x3 on the nominal grid -> GELU -> fc2.
struct MlpWeights {
  LinearWeights fc1;
  Tensor dw_w, dw_b;
  LinearWeights fc2;
};

struct BlockWeights {
  NormWeights norm1;
  AttentionWeights attn;
  NormWeights norm2;
  MlpWeights mlp;
};

struct StemWeights {
  Tensor conv1_w, conv1_b;
  NormWeights norm1;
  Tensor conv2_w, conv2_b;
  NormWeights norm2;
};

struct CtmWeights {
  NormWeights norm;
  Tensor score_w;  // C_in x 1
  Tensor score_b;  // 1
  NormWeights norm_q, norm_kv;
  LinearWeights skip;  // C_in -> C_out residual path for the merged tokens
  AttentionWeights attn;
  NormWeights norm2;
  MlpWeights mlp;
};

struct HeadWeights {
  NormWeights norm;
  LinearWeights fc;
};

struct MtaWeights {
  std::array<LinearWeights, kNumStages> lateral;
  std::array<BlockWeights, kNumStages> blocks;
};

enum class BlockMode { SR, CR };

struct BlockConfig {
  std::size_t dim = 0;
  std::size_t heads = 1;
  std::size_t sr_ratio = 1;
  BlockMode mode = BlockMode::SR;
  CrAggregation cr_aggregation = CrAggregation::Mean;
  float eps = 1e-6f;
};

struct CtmConfig {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::size_t heads = 1;
  std::size_t parts = 1;
  double ratio = 0.25;
  std::size_t knn = 5;
  bool key_reduction = false;
  std::size_t sr_ratio = 1;  // used when key_reduction is on
  float eps = 1e-6f;
};

/// Counters and optional observers for one forward pass.
struct RunContext {
  std::uint64_t attention_macs = 0;  // QK^T plus AV multiply-accumulates
  std::uint64_t dist_ops = 0;        // clustering distance multiply-accumulates
  /// (attention layer name, key/value token count) in execution order.
  std::vector<std::pair<std::string, std::size_t>> kv_counts;
  /// Receives h x M x N attention weights per layer when set.
  std::function<void(const std::string&, const Tensor&)> attention_sink;
};

// Weight specs. Names are "<prefix>.<param>"; linear weights are stored
// in x out.
void append_stem_specs(std::vector<WeightSpec>& out, std::size_t dim);
void append_block_specs(std::vector<WeightSpec>& out, const std::string& prefix, std::size_t dim,
                        std::size_t mlp_ratio, std::size_t sr_ratio);
void append_ctm_specs(std::vector<WeightSpec>& out, const std::string& prefix, const CtmConfig& cfg,
                      std::size_t mlp_ratio);
void append_head_specs(std::vector<WeightSpec>& out, std::size_t dim, std::size_t num_classes);

StemWeights bind_stem(const WeightStore& store);
BlockWeights bind_block(const WeightStore& store, const std::string& prefix, bool has_sr);
CtmWeights bind_ctm(const WeightStore& store, const std::string& prefix, bool key_reduction);
HeadWeights bind_head(const WeightStore& store);

/// Two stride-2 3x3 convolutions, each followed by channel layer norm (GELU
/// between them), giving one token per stride-4 pixel.
TokenSet stem(const Tensor& image, const StemWeights& w, float eps = 1e-6f);

/// Pre-norm attention over SR- or CR-reduced keys/values with the key
/// importance as additive bias, then a pre-norm MLP whose hidden features
/// pass through a depthwise 3x3 convolution on the nominal grid. Both
/// branches are residual. CR mode needs `composed` (token -> final cluster)
/// and `num_final`.
TokenSet transformer_block(const TokenSet& tokens, const BlockConfig& cfg, const BlockWeights& w,
                           std::span<const std::int32_t> composed = {}, std::size_t num_final = 0,
                           RunContext* ctx = nullptr, const std::string& name = "block");

struct CtmOutput {
  TokenSet tokens;
  ClusterResult clusters;
};

/// Importance prediction, local DPC-kNN, importance-weighted merge, then one
/// cross-attention block (merged tokens as queries, original tokens as
/// keys/values biased by importance) that also lifts the width to out_dim.
CtmOutput ctm_module(const TokenSet& tokens, const CtmConfig& cfg, const CtmWeights& w, RunContext* ctx = nullptr,
                     const std::string& name = "ctm");

}  // namespace tcf
