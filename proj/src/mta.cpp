#include "tcf/mta.hpp"

#include <numeric>
#include <stdexcept>

namespace tcf {

ComposedAssignment compose_assignments(const TokenPyramid& pyramid) {
  if (pyramid.stages.size() != kNumStages || pyramid.clusters.size() != kNumStages - 1) {
    throw std::invalid_argument("compose_assignments: pyramid is missing stages or clustering records");
  }
  ComposedAssignment out;
  out.num_final = pyramid.stages.back().size();
  out.maps.resize(kNumStages);
  auto& last = out.maps[kNumStages - 1];
  last.resize(out.num_final);
  std::iota(last.begin(), last.end(), 0);
  for (int s = kNumStages - 2; s >= 0; --s) {
    const auto& assign = pyramid.clusters[static_cast<std::size_t>(s)].assignment;
    const auto& next = out.maps[static_cast<std::size_t>(s) + 1];
    if (assign.size() != pyramid.stages[static_cast<std::size_t>(s)].size()) {
      throw std::invalid_argument("compose_assignments: record " + std::to_string(s) + " does not match stage size");
    }
    auto& m = out.maps[static_cast<std::size_t>(s)];
    m.resize(assign.size());
    for (std::size_t t = 0; t < assign.size(); ++t) {
      const auto a = assign[t];
      if (a < 0 || static_cast<std::size_t>(a) >= next.size()) throw std::invalid_argument("compose_assignments: bad assignment");
      m[t] = next[static_cast<std::size_t>(a)];
    }
  }
  return out;
}

TokenSet aggregation_step(const TokenSet& deep, const ClusterResult& record, const TokenSet& lateral,
                          const BlockWeights& block, const BlockConfig& cfg, std::span<const std::int32_t> composed,
                          std::size_t num_final, RunContext* ctx, const std::string& name) {
  if (record.num_tokens() != lateral.size()) {
    throw std::invalid_argument("aggregation_step: upsampled count " + std::to_string(record.num_tokens()) +
                                " differs from lateral count " + std::to_string(lateral.size()));
  }
  TokenSet up = upsample_tokens(deep, record, lateral);
  add_inplace(up.features, lateral.features);
  return transformer_block(up, cfg, block, composed, num_final, ctx, name);
}

MtaOutput mta_forward(const TokenPyramid& pyramid, MtaVariant variant, const MtaWeights& weights,
                      const ModelConfig& config, RunContext* ctx) {
  MtaOutput out;
  out.composed = compose_assignments(pyramid);
  RunContext local;
  RunContext& run = ctx ? *ctx : local;

  auto block_cfg = [&](int s) {
    BlockConfig c{config.mta_dim, config.mta_heads, config.stages[s].sr_ratio,
                  variant == MtaVariant::CR ? BlockMode::CR : BlockMode::SR, config.cr_aggregation, config.ln_eps};
    return c;
  };
  auto lateral = [&](int s) {
    const auto& st = pyramid.stages[static_cast<std::size_t>(s)];
    return with_features(st, weights.lateral[s](st.features));
  };
  auto last_kv = [&] { return run.kv_counts.back().second; };

  const int top = kNumStages - 1;
  const std::string top_name = "mta.block" + std::to_string(top);
  out.steps[top] = transformer_block(lateral(top), block_cfg(top), weights.blocks[top], out.composed.maps[top],
                                     out.composed.num_final, &run, top_name);
  out.kv_tokens[top] = last_kv();
  for (int s = top - 1; s >= 0; --s) {
    out.steps[s] = aggregation_step(out.steps[s + 1], pyramid.clusters[static_cast<std::size_t>(s)], lateral(s),
                                    weights.blocks[s], block_cfg(s), out.composed.maps[static_cast<std::size_t>(s)],
                                    out.composed.num_final, &run, "mta.block" + std::to_string(s));
    out.kv_tokens[s] = last_kv();
  }
  for (int s = 0; s < kNumStages; ++s) {
    out.pyramid.levels[s] = tokens_to_map(out.steps[s], out.steps[s].grid_h, out.steps[s].grid_w);
  }
  return out;
}

}  // namespace tcf
