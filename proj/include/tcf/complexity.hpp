#pragma once

#include <cstdint>
#include <vector>

#include "tcf/config.hpp"

namespace tcf {

/// Distance multiply-accumulates for clustering N tokens of width C split
/// evenly into P parts (the first N mod P parts take one extra token):
/// sum_p N_p^2 C, which is N^2 C / P when P divides N.
std::uint64_t clustering_dist_ops(std::uint64_t tokens, std::uint64_t channels, std::uint64_t parts);

struct CtmCost {
  std::size_t tokens_in = 0;
  std::size_t tokens_out = 0;
  std::size_t channels = 0;
  std::size_t parts = 1;
  std::uint64_t dist_ops = 0;
};

/// Analytic cost of one backbone forward pass at H x W, assuming balanced
/// parts. Matches the runtime counters when the stem grid divides evenly.
struct ComplexityEstimate {
  std::vector<std::size_t> stage_tokens;
  std::vector<CtmCost> ctm;
  std::uint64_t dist_ops = 0;
  std::uint64_t attention_macs = 0;
};

ComplexityEstimate estimate_complexity(const ModelConfig& config, std::size_t height, std::size_t width);

}  // namespace tcf
