#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tcf/tensor.hpp"

namespace tcf {

inline constexpr int kNumStages = 4;

/// One stage's dynamic tokens. `pixel_map` covers the stem grid
/// (map_h x map_w, stride 4) and records which token owns each pixel; the
/// nominal grid (grid_h x grid_w) is the stage's regular-pyramid resolution.
struct TokenSet {
  Tensor features;                      // N x C
  std::vector<float> importance;        // N
  std::vector<std::int32_t> pixel_map;  // map_h * map_w token ids
  std::size_t map_h = 0;
  std::size_t map_w = 0;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  int stage = 0;

  std::size_t size() const { return features.empty() ? 0 : features.dim(0); }
  std::size_t channels() const { return features.empty() ? 0 : features.dim(1); }
};

/// Stage-0 layout: one token per stem pixel, raster order, zero importance.
TokenSet grid_tokens(Tensor features, std::size_t h, std::size_t w);

/// Number of stem pixels owned by each token.
std::vector<std::size_t> owned_pixel_counts(const TokenSet& tokens);

/// Checks the TokenSet invariants; throws std::invalid_argument on violation.
void validate(const TokenSet& tokens);

/// Same layout and importance, new features (row count must match).
TokenSet with_features(const TokenSet& layout, Tensor features);

}  // namespace tcf
