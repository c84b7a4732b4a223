#include "tcf/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tcf {

std::uint64_t clustering_dist_ops(std::uint64_t tokens, std::uint64_t channels, std::uint64_t parts) {
  if (parts == 0) throw std::invalid_argument("clustering_dist_ops: zero parts");
  const std::uint64_t base = tokens / parts, extra = tokens % parts;
  return extra * (base + 1) * (base + 1) * channels + (parts - extra) * base * base * channels;
}

ComplexityEstimate estimate_complexity(const ModelConfig& config, std::size_t height, std::size_t width) {
  config.validate();
  validate_geometry(config, height, width);
  ComplexityEstimate est;
  const std::size_t h0 = height / 4, w0 = width / 4;
  std::size_t n = h0 * w0;
  for (int s = 0; s < kNumStages; ++s) {
    const auto& st = config.stages[s];
    est.stage_tokens.push_back(n);
    const std::size_t gh = h0 >> s, gw = w0 >> s;
    const std::size_t kv = st.sr_ratio > 1 ? (gh / st.sr_ratio) * (gw / st.sr_ratio) : n;
    est.attention_macs += st.blocks * 2ULL * n * kv * st.dim;
    if (s + 1 == kNumStages) break;

    CtmCost c;
    c.tokens_in = n;
    c.channels = st.dim;
    c.parts = config.ctm_parts[static_cast<std::size_t>(s)];
    c.dist_ops = clustering_dist_ops(n, st.dim, c.parts);
    const std::size_t base = n / c.parts, extra = n % c.parts;
    auto per_part = [&](std::size_t np) {
      return static_cast<std::size_t>(std::clamp<long long>(std::llround(static_cast<double>(np) * config.cluster_ratio),
                                                            1, static_cast<long long>(np)));
    };
    c.tokens_out = extra * per_part(base + 1) + (c.parts - extra) * per_part(base);
    est.dist_ops += c.dist_ops;

    const std::size_t ctm_kv =
        config.ctm_key_reduction && st.sr_ratio > 1 ? (gh / st.sr_ratio) * (gw / st.sr_ratio) : n;
    est.attention_macs += 2ULL * c.tokens_out * ctm_kv * config.stages[s + 1].dim;
    est.ctm.push_back(c);
    n = c.tokens_out;
  }
  return est;
}

}  // namespace tcf
