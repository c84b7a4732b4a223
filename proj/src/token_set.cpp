#include "tcf/token_set.hpp"

#include <stdexcept>
#include <string>

namespace tcf {

TokenSet grid_tokens(Tensor features, std::size_t h, std::size_t w) {
  if (features.rank() != 2 || features.dim(0) != h * w) {
    throw std::invalid_argument("grid_tokens: expected " + std::to_string(h * w) + " feature rows");
  }
  TokenSet t;
  t.features = std::move(features);
  t.importance.assign(h * w, 0.0f);
  t.pixel_map.resize(h * w);
  for (std::size_t i = 0; i < h * w; ++i) t.pixel_map[i] = static_cast<std::int32_t>(i);
  t.map_h = t.grid_h = h;
  t.map_w = t.grid_w = w;
  t.stage = 0;
  return t;
}

std::vector<std::size_t> owned_pixel_counts(const TokenSet& tokens) {
  std::vector<std::size_t> counts(tokens.size(), 0);
  for (auto id : tokens.pixel_map) {
    if (id < 0 || static_cast<std::size_t>(id) >= counts.size()) {
      throw std::invalid_argument("pixel_map holds invalid token id " + std::to_string(id));
    }
    ++counts[static_cast<std::size_t>(id)];
  }
  return counts;
}

void validate(const TokenSet& tokens) {
  if (tokens.features.rank() != 2) throw std::invalid_argument("TokenSet features must be N x C");
  if (tokens.importance.size() != tokens.size()) {
    throw std::invalid_argument("TokenSet importance length differs from token count");
  }
  if (tokens.pixel_map.size() != tokens.map_h * tokens.map_w) {
    throw std::invalid_argument("TokenSet pixel_map does not cover the stem grid");
  }
  const auto counts = owned_pixel_counts(tokens);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) throw std::invalid_argument("token " + std::to_string(i) + " owns no pixel");
  }
}

TokenSet with_features(const TokenSet& layout, Tensor features) {
  if (features.rank() != 2 || features.dim(0) != layout.size()) {
    throw std::invalid_argument("with_features: row count mismatch");
  }
  TokenSet t;
  t.features = std::move(features);
  t.importance = layout.importance;
  t.pixel_map = layout.pixel_map;
  t.map_h = layout.map_h;
  t.map_w = layout.map_w;
  t.grid_h = layout.grid_h;
  t.grid_w = layout.grid_w;
  t.stage = layout.stage;
  return t;
}

}  // namespace tcf
