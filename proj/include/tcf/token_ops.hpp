#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tcf/clustering.hpp"
#include "tcf/tensor.hpp"
#include "tcf/token_set.hpp"

namespace tcf {

/// p_i = x_i . w + b, one linear unit per token. `w` is C x 1.
std::vector<float> predict_importance(const Tensor& features, const Tensor& w, float b);

/// Importance-weighted cluster average:
///   y_i = sum_{j in C_i} e^{p_j} x_j / sum_{j in C_i} e^{p_j}
/// Weights use per-cluster max subtraction. A channel whose members all agree
/// returns that value exactly; otherwise the result is clamped to the members'
/// range, so the output is always a convex combination. Merged importance is
/// logsumexp of member importances; the pixel map is relabeled through the
/// assignment and the nominal grid halves.
TokenSet merge_tokens(const TokenSet& tokens, const ClusterResult& clusters);

/// softmax(Q K^T / sqrt(d_head) + p) V per head, heads concatenated along
/// channels. `bias` is per key and shared by every query and head. When
/// `weights_out` is given it receives the h x M x N attention weights.
Tensor biased_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::span<const float> bias,
                        std::size_t heads, Tensor* weights_out = nullptr);

/// Copies merged features back onto the pre-merge tokens: token j gets the
/// features of cluster assignment[j]. Layout and importance come from
/// `pre_merge`, the token set the clusters were computed on.
TokenSet upsample_tokens(const TokenSet& merged, const ClusterResult& clusters, const TokenSet& pre_merge);

/// Key/value tokens produced by a reduction layer.
struct ReducedTokens {
  Tensor features;                // M x C
  std::vector<float> importance;  // M
};

/// Spatial reduction: render tokens at the nominal grid, apply a stride-r
/// r x r convolution (`conv_w` is C x C x r x r) and flatten in raster order.
/// Importance of a reduced token is the mean importance over the stem pixels
/// its cell covers.
ReducedTokens sr_reduce(const TokenSet& tokens, std::size_t ratio, const Tensor& conv_w, const Tensor& conv_b);

enum class CrAggregation { Mean, Importance };

/// Clustering reduction: merges tokens onto the `num_clusters` final-stage
/// clusters given by `composed` (token -> final cluster). Output layout is the
/// final stage's.
TokenSet cr_reduce(const TokenSet& tokens, std::span<const std::int32_t> composed, std::size_t num_clusters,
                   CrAggregation aggregation = CrAggregation::Mean);

/// C x h x w rendering. (h, w) must be the stem grid or the nominal grid; at
/// a coarser grid each cell takes the token owning the cell's center pixel
/// (row y*f + f/2 for a downsampling factor f).
Tensor tokens_to_map(const TokenSet& tokens, std::size_t h, std::size_t w);

/// Inverse of tokens_to_map: each token averages the map cells containing
/// its stem pixels, one sample per owned pixel.
Tensor map_to_tokens(const Tensor& map, const TokenSet& tokens);

}  // namespace tcf
