#pragma once

#include <cstdint>
#include <vector>

#include "tcf/tensor.hpp"
#include "tcf/token_set.hpp"

namespace tcf {

/// Output of density-peaks clustering over one token set. rho, delta and
/// score are double precision.
struct ClusterResult {
  std::vector<double> rho;                // local density
  std::vector<double> delta;              // distance indicator
  std::vector<double> score;              // rho * delta
  std::vector<std::int32_t> centers;      // token index of each cluster's center
  std::vector<std::int32_t> assignment;   // token -> cluster id in [0, K)
  std::vector<std::int32_t> part_label;   // token -> spatial part in [0, P)
  std::int32_t num_parts = 1;
  std::uint64_t dist_ops = 0;             // multiply-accumulates spent on pairwise distances

  std::size_t num_clusters() const { return centers.size(); }
  std::size_t num_tokens() const { return assignment.size(); }
};

/// Full N x N matrix of squared Euclidean distances. Each entry sums
/// (x_ic - x_jc)^2 over c in ascending order in float. Adds N*N*C to `ops`
/// when given.
Tensor pairwise_sq_distances(const Tensor& features, std::uint64_t* ops = nullptr);

/// rho_i = exp(-(1/k) * sum of squared distances to the k nearest other
/// tokens). Neighbours are ranked by (squared distance, index) and summed in
/// that order in double.
std::vector<double> local_density(const Tensor& features, std::size_t k);

/// delta_i = distance to the nearest denser token; the densest token gets its
/// maximum distance to any token. "Denser" is the total order rho descending,
/// then lower index first.
std::vector<double> distance_indicator(const Tensor& features, const std::vector<double>& rho);

/// Indices of the K largest rho*delta, ties to the lower index, sorted by
/// descending score.
std::vector<std::int32_t> select_centers(const std::vector<double>& rho,
                                         const std::vector<double>& delta, std::size_t k);

/// Nearest center by squared distance; ties go to the earlier center in
/// `centers`. Centers always own themselves.
std::vector<std::int32_t> assign_to_centers(const Tensor& features,
                                            const std::vector<std::int32_t>& centers);

/// DPC-kNN over the whole set (one part).
ClusterResult cluster_global(const Tensor& features, std::size_t num_clusters, std::size_t knn);

/// Splits tokens into a sqrt(P) x sqrt(P) grid of spatial parts by pixel
/// centroid and clusters each part independently with
/// K_p = max(1, round(N_p * ratio)) and k clamped to N_p - 1. Cluster ids are
/// numbered part-major.
ClusterResult cluster_local(const TokenSet& tokens, std::size_t parts, double ratio, std::size_t knn);

/// Part index of every token (pixel-centroid rule used by cluster_local).
std::vector<std::int32_t> part_labels(const TokenSet& tokens, std::size_t parts);

/// Checks the ClusterResult invariants; throws std::logic_error on violation.
void validate(const ClusterResult& result);

}  // namespace tcf
