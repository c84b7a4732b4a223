#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "tcf/token_ops.hpp"

namespace tcf {

struct StageConfig {
  std::size_t dim = 0;
  std::size_t heads = 1;
  std::size_t blocks = 1;
  std::size_t sr_ratio = 1;
  std::size_t mlp_ratio = 4;
};

struct ModelConfig {
  std::array<StageConfig, kNumStages> stages{};
  std::array<std::size_t, kNumStages - 1> ctm_parts{16, 4, 1};
  double cluster_ratio = 0.25;
  std::size_t knn_k = 5;
  std::size_t num_classes = 1000;
  std::uint64_t seed = 0;
  std::size_t mta_dim = 64;
  std::size_t mta_heads = 2;
  std::size_t mta_mlp_ratio = 4;
  CrAggregation cr_aggregation = CrAggregation::Mean;
  // Spatial reduction of the originals inside CTM cross-attention.
  bool ctm_key_reduction = false;
  float ln_eps = 1e-6f;

  /// Desk-scale fixture: dims (32, 64, 160, 256), heads (1, 2, 5, 8),
  /// two blocks per stage, SR ratios (8, 4, 2, 1).
  static ModelConfig tiny();

  /// Same layout with every part count set to 1 (global clustering).
  ModelConfig with_global_clustering() const;

  void validate() const;
};

/// Checks that an H x W image yields integral grids for every stage and SR ratio.
void validate_geometry(const ModelConfig& config, std::size_t height, std::size_t width);

ModelConfig parse_config(const std::string& json_text);
std::string config_to_json(const ModelConfig& config);
ModelConfig load_config(const std::string& path);

}  // namespace tcf
