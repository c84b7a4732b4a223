#include "tcf/backbone.hpp"

#include <stdexcept>

namespace tcf {

namespace {

std::string block_prefix(int stage, std::size_t b) { return "stage" + std::to_string(stage) + ".block" + std::to_string(b); }
std::string ctm_prefix(int i) { return "ctm" + std::to_string(i); }

}  // namespace

CtmConfig ctm_config(const ModelConfig& config, int i) {
  CtmConfig c;
  c.in_dim = config.stages[i].dim;
  c.out_dim = config.stages[i + 1].dim;
  c.heads = config.stages[i + 1].heads;
  c.parts = config.ctm_parts[static_cast<std::size_t>(i)];
  c.ratio = config.cluster_ratio;
  c.knn = config.knn_k;
  c.key_reduction = config.ctm_key_reduction;
  c.sr_ratio = config.stages[i].sr_ratio;
  c.eps = config.ln_eps;
  return c;
}

BlockConfig stage_block_config(const ModelConfig& config, int stage) {
  const auto& st = config.stages[stage];
  return BlockConfig{st.dim, st.heads, st.sr_ratio, BlockMode::SR, config.cr_aggregation, config.ln_eps};
}

std::vector<WeightSpec> model_weight_specs(const ModelConfig& config) {
  config.validate();
  std::vector<WeightSpec> specs;
  append_stem_specs(specs, config.stages[0].dim);
  for (int s = 0; s < kNumStages; ++s) {
    const auto& st = config.stages[s];
    for (std::size_t b = 0; b < st.blocks; ++b) {
      append_block_specs(specs, block_prefix(s, b), st.dim, st.mlp_ratio, st.sr_ratio);
    }
    if (s + 1 < kNumStages) append_ctm_specs(specs, ctm_prefix(s), ctm_config(config, s), config.stages[s + 1].mlp_ratio);
  }
  append_head_specs(specs, config.stages[kNumStages - 1].dim, config.num_classes);
  for (int s = 0; s < kNumStages; ++s) {
    const std::string lat = "mta.lateral" + std::to_string(s);
    specs.push_back({lat + ".weight", {config.stages[s].dim, config.mta_dim}, InitKind::Normal, 0.02f});
    specs.push_back({lat + ".bias", {config.mta_dim}, InitKind::Zeros, 0.0f});
    append_block_specs(specs, "mta.block" + std::to_string(s), config.mta_dim, config.mta_mlp_ratio,
                       config.stages[s].sr_ratio);
  }
  return specs;
}

WeightStore generate_model_weights(const ModelConfig& config, std::uint64_t seed) {
  return generate_weights(model_weight_specs(config), seed);
}

Model::Model(ModelConfig config, const WeightStore& store) : config_(std::move(config)) {
  std::vector<std::pair<std::string, Shape>> expected;
  for (const auto& spec : model_weight_specs(config_)) expected.emplace_back(spec.name, spec.shape);
  store.require(expected);

  stem_ = bind_stem(store);
  for (int s = 0; s < kNumStages; ++s) {
    const auto& st = config_.stages[s];
    for (std::size_t b = 0; b < st.blocks; ++b) blocks_[s].push_back(bind_block(store, block_prefix(s, b), st.sr_ratio > 1));
    if (s + 1 < kNumStages) {
      ctm_[s] = bind_ctm(store, ctm_prefix(s), config_.ctm_key_reduction && st.sr_ratio > 1);
    }
    mta_.lateral[s] = {store.get("mta.lateral" + std::to_string(s) + ".weight"),
                       store.get("mta.lateral" + std::to_string(s) + ".bias")};
    mta_.blocks[s] = bind_block(store, "mta.block" + std::to_string(s), st.sr_ratio > 1);
  }
  head_ = bind_head(store);
}

TokenSet Model::stem(const Tensor& image) const { return tcf::stem(image, stem_, config_.ln_eps); }

TokenPyramid Model::forward(const Tensor& image, RunContext* ctx) const {
  if (image.rank() != 3 || image.dim(0) != 3) throw std::invalid_argument("forward expects a 3 x H x W image");
  validate_geometry(config_, image.dim(1), image.dim(2));
  RunContext local;
  RunContext& run = ctx ? *ctx : local;
  const auto macs0 = run.attention_macs;
  const auto dist0 = run.dist_ops;

  TokenPyramid pyr;
  pyr.image_h = image.dim(1);
  pyr.image_w = image.dim(2);
  TokenSet tokens = stem(image);
  pyr.stem_h = tokens.map_h;
  pyr.stem_w = tokens.map_w;

  for (int s = 0; s < kNumStages; ++s) {
    const BlockConfig cfg = stage_block_config(config_, s);
    for (std::size_t b = 0; b < blocks_[s].size(); ++b) {
      tokens = transformer_block(tokens, cfg, blocks_[s][b], {}, 0, &run, block_prefix(s, b));
    }
    pyr.stages.push_back(tokens);
    if (s + 1 < kNumStages) {
      CtmOutput out = ctm_module(tokens, ctm_config(config_, s), ctm_[s], &run, ctm_prefix(s));
      pyr.clusters.push_back(std::move(out.clusters));
      tokens = std::move(out.tokens);
    }
  }
  pyr.attention_macs = run.attention_macs - macs0;
  pyr.dist_ops = run.dist_ops - dist0;
  return pyr;
}

std::vector<float> classify(const TokenSet& final_tokens, const HeadWeights& head, float eps) {
  const Tensor xn = layer_norm(final_tokens.features, head.norm.gamma, head.norm.beta, eps);
  const std::size_t n = xn.dim(0), c = xn.dim(1);
  std::vector<double> sum(c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = xn.row(i);
    for (std::size_t j = 0; j < c; ++j) sum[j] += r[j];
  }
  Tensor mean({1, c});
  for (std::size_t j = 0; j < c; ++j) mean.data()[j] = static_cast<float>(sum[j] / static_cast<double>(n));
  const Tensor logits = head.fc(mean);
  return {logits.data().begin(), logits.data().end()};
}

std::vector<float> Model::classify(const TokenPyramid& pyramid) const {
  if (pyramid.stages.size() != kNumStages) throw std::invalid_argument("classify: pyramid is incomplete");
  return tcf::classify(pyramid.stages.back(), head_, config_.ln_eps);
}

TokenPyramid forward(const Tensor& image, const ModelConfig& config, const WeightStore& store) {
  return Model(config, store).forward(image);
}

}  // namespace tcf
