#pragma once

#include <random>
#include <string>

#include "tcf/backbone.hpp"

namespace fixtures {

inline tcf::Tensor random_image(std::uint64_t seed, std::size_t h, std::size_t w) {
  std::mt19937_64 g(seed);
  std::uniform_int_distribution<int> u(0, 255);
  tcf::Tensor img({3, h, w});
  for (float& v : img.data()) v = static_cast<float>(u(g)) / 255.0f;
  return img;
}

inline const tcf::WeightStore& tiny_weights() {
  static const tcf::WeightStore store = tcf::generate_model_weights(tcf::ModelConfig::tiny(), 0);
  return store;
}

inline void zero(tcf::WeightStore& store, const std::string& prefix) {
  for (const char* p : {".weight", ".bias"}) {
    for (float& v : store.get_mut(prefix + p).data()) v = 0.0f;
  }
}

/// Zeroes the attention output projection and the second MLP linear layer.
inline void zero_block_outputs(tcf::WeightStore& store, const std::string& block) {
  zero(store, block + ".attn.proj");
  zero(store, block + ".mlp.fc2");
}

}  // namespace fixtures
