#include "tcf/token_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "tcf/parallel.hpp"

namespace tcf {

namespace {

// Weighted per-segment averages with exact handling of constant channels
// and results clamped to the members' range. Samples must be added in a
// fixed order for reproducibility.
class SegmentAverager {
 public:
  SegmentAverager(std::size_t segments, std::size_t channels)
      : channels_(channels),
        sum_(segments * channels, 0.0),
        weight_(segments, 0.0),
        lo_(segments * channels, std::numeric_limits<float>::infinity()),
        hi_(segments * channels, -std::numeric_limits<float>::infinity()),
        count_(segments, 0) {}

  template <class Get>
  void add(std::size_t segment, double w, Get&& value_at) {
    const std::size_t base = segment * channels_;
    for (std::size_t c = 0; c < channels_; ++c) {
      const float v = value_at(c);
      sum_[base + c] += w * static_cast<double>(v);
      lo_[base + c] = std::min(lo_[base + c], v);
      hi_[base + c] = std::max(hi_[base + c], v);
    }
    weight_[segment] += w;
    ++count_[segment];
  }

  std::size_t count(std::size_t segment) const { return count_[segment]; }

  Tensor finish(const char* op) const {
    const std::size_t segments = count_.size();
    Tensor out({segments, channels_});
    for (std::size_t s = 0; s < segments; ++s) {
      if (count_[s] == 0) throw std::invalid_argument(std::string(op) + ": segment " + std::to_string(s) + " is empty");
      for (std::size_t c = 0; c < channels_; ++c) {
        const std::size_t i = s * channels_ + c;
        if (lo_[i] == hi_[i]) {
          out.data()[i] = lo_[i];
        } else {
          out.data()[i] = std::clamp(static_cast<float>(sum_[i] / weight_[s]), lo_[i], hi_[i]);
        }
      }
    }
    ensure_finite(out, op);
    return out;
  }

 private:
  std::size_t channels_;
  std::vector<double> sum_;
  std::vector<double> weight_;
  std::vector<float> lo_, hi_;
  std::vector<std::size_t> count_;
};

// Per-segment max and logsumexp of importance.
struct SegmentLogits {
  std::vector<float> max;
  std::vector<float> logsumexp;
};

SegmentLogits segment_logits(std::span<const float> importance, std::span<const std::int32_t> segment_of,
                             std::size_t segments) {
  SegmentLogits out;
  out.max.assign(segments, -std::numeric_limits<float>::infinity());
  for (std::size_t j = 0; j < segment_of.size(); ++j) {
    auto& m = out.max[static_cast<std::size_t>(segment_of[j])];
    m = std::max(m, importance[j]);
  }
  std::vector<double> sum(segments, 0.0);
  for (std::size_t j = 0; j < segment_of.size(); ++j) {
    const auto s = static_cast<std::size_t>(segment_of[j]);
    sum[s] += std::exp(static_cast<double>(importance[j]) - static_cast<double>(out.max[s]));
  }
  out.logsumexp.resize(segments);
  for (std::size_t s = 0; s < segments; ++s) {
    out.logsumexp[s] = static_cast<float>(static_cast<double>(out.max[s]) + std::log(sum[s]));
  }
  return out;
}

std::size_t grid_factor(std::size_t full, std::size_t coarse, const char* op) {
  if (coarse == 0 || full % coarse != 0) {
    throw std::invalid_argument(std::string(op) + ": grid " + std::to_string(coarse) +
                                " does not divide the stem grid " + std::to_string(full));
  }
  return full / coarse;
}

void check_render_grid(const TokenSet& tokens, std::size_t h, std::size_t w, const char* op) {
  const bool stem = h == tokens.map_h && w == tokens.map_w;
  const bool nominal = h == tokens.grid_h && w == tokens.grid_w;
  if (!stem && !nominal) {
    throw std::invalid_argument(std::string(op) + ": unsupported grid " + std::to_string(h) + "x" +
                                std::to_string(w));
  }
}

}  // namespace

std::vector<float> predict_importance(const Tensor& features, const Tensor& w, float b) {
  if (features.rank() != 2) throw std::invalid_argument("predict_importance expects N x C features");
  const std::size_t c = features.dim(1);
  if (w.size() != c) throw std::invalid_argument("predict_importance: weight length mismatch");
  std::vector<float> p(features.dim(0));
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto x = features.row(i);
    float acc = 0.0f;
    for (std::size_t ch = 0; ch < c; ++ch) acc += x[ch] * w.data()[ch];
    p[i] = acc + b;
    if (!std::isfinite(p[i])) throw NonFiniteError("predict_importance: non-finite score");
  }
  return p;
}

TokenSet merge_tokens(const TokenSet& tokens, const ClusterResult& clusters) {
  const std::size_t n = tokens.size();
  const std::size_t k = clusters.num_clusters();
  if (clusters.assignment.size() != n) {
    throw std::invalid_argument("merge_tokens: cluster record covers " + std::to_string(clusters.assignment.size()) +
                                " tokens, token set has " + std::to_string(n));
  }
  for (auto a : clusters.assignment) {
    if (a < 0 || static_cast<std::size_t>(a) >= k) throw std::invalid_argument("merge_tokens: assignment out of range");
  }
  const auto logits = segment_logits(tokens.importance, clusters.assignment, k);

  SegmentAverager avg(k, tokens.channels());
  for (std::size_t j = 0; j < n; ++j) {
    const auto s = static_cast<std::size_t>(clusters.assignment[j]);
    const double w = std::exp(static_cast<double>(tokens.importance[j]) - static_cast<double>(logits.max[s]));
    const auto x = tokens.features.row(j);
    avg.add(s, w, [&](std::size_t c) { return x[c]; });
  }

  TokenSet out;
  out.features = avg.finish("merge_tokens");
  out.importance = logits.logsumexp;
  out.pixel_map.resize(tokens.pixel_map.size());
  for (std::size_t px = 0; px < tokens.pixel_map.size(); ++px) {
    out.pixel_map[px] = clusters.assignment[static_cast<std::size_t>(tokens.pixel_map[px])];
  }
  out.map_h = tokens.map_h;
  out.map_w = tokens.map_w;
  out.grid_h = std::max<std::size_t>(1, tokens.grid_h / 2);
  out.grid_w = std::max<std::size_t>(1, tokens.grid_w / 2);
  out.stage = tokens.stage + 1;
  return out;
}

Tensor biased_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::span<const float> bias,
                        std::size_t heads, Tensor* weights_out) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) throw std::invalid_argument("attention expects rank-2 q/k/v");
  const std::size_t m = q.dim(0), n = k.dim(0), c = q.dim(1);
  if (k.dim(1) != c || v.dim(1) != c || v.dim(0) != n) {
    throw std::invalid_argument("attention shape mismatch: q" + shape_string(q.shape()) + " k" +
                                shape_string(k.shape()) + " v" + shape_string(v.shape()));
  }
  if (bias.size() != n) throw std::invalid_argument("attention bias length must equal key count");
  if (heads == 0 || c % heads != 0) throw std::invalid_argument("attention channels not divisible by heads");
  const std::size_t d = c / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(d));

  Tensor out({m, c});
  if (weights_out) *weights_out = Tensor({heads, m, n});
  parallel_for(
      m,
      [&](std::size_t i) {
        std::vector<float> logit(n);
        std::vector<double> e(n);
        std::vector<float> w(n);
        const auto qi = q.row(i);
        auto oi = out.row(i);
        for (std::size_t h = 0; h < heads; ++h) {
          const std::size_t off = h * d;
          float mx = -std::numeric_limits<float>::infinity();
          for (std::size_t j = 0; j < n; ++j) {
            const auto kj = k.row(j);
            float dot = 0.0f;
            for (std::size_t t = 0; t < d; ++t) dot += qi[off + t] * kj[off + t];
            logit[j] = dot * scale + bias[j];
            mx = std::max(mx, logit[j]);
          }
          double sum = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            e[j] = std::exp(static_cast<double>(logit[j]) - static_cast<double>(mx));
            sum += e[j];
          }
          for (std::size_t j = 0; j < n; ++j) w[j] = static_cast<float>(e[j] / sum);
          for (std::size_t j = 0; j < n; ++j) {
            const auto vj = v.row(j);
            const float wj = w[j];
            for (std::size_t t = 0; t < d; ++t) oi[off + t] += wj * vj[off + t];
          }
          if (weights_out) {
            std::copy(w.begin(), w.end(), weights_out->data().begin() + static_cast<std::ptrdiff_t>((h * m + i) * n));
          }
        }
      },
      8);
  ensure_finite(out, "biased_attention");
  return out;
}

TokenSet upsample_tokens(const TokenSet& merged, const ClusterResult& clusters, const TokenSet& pre_merge) {
  if (merged.size() != clusters.num_clusters()) {
    throw std::invalid_argument("upsample_tokens: merged set has " + std::to_string(merged.size()) +
                                " tokens but the record has " + std::to_string(clusters.num_clusters()) + " clusters");
  }
  if (pre_merge.size() != clusters.num_tokens()) {
    throw std::invalid_argument("upsample_tokens: record covers " + std::to_string(clusters.num_tokens()) +
                                " tokens, target layout has " + std::to_string(pre_merge.size()));
  }
  const std::size_t n = clusters.num_tokens();
  const std::size_t c = merged.channels();
  Tensor features({n, c});
  for (std::size_t j = 0; j < n; ++j) {
    const auto a = clusters.assignment[j];
    if (a < 0 || static_cast<std::size_t>(a) >= merged.size()) throw std::invalid_argument("upsample_tokens: bad assignment");
    const auto src = merged.features.row(static_cast<std::size_t>(a));
    std::copy(src.begin(), src.end(), features.row(j).begin());
  }
  return with_features(pre_merge, std::move(features));
}

ReducedTokens sr_reduce(const TokenSet& tokens, std::size_t ratio, const Tensor& conv_w, const Tensor& conv_b) {
  if (ratio == 0 || tokens.grid_h % ratio != 0 || tokens.grid_w % ratio != 0) {
    throw std::invalid_argument("sr_reduce: ratio " + std::to_string(ratio) + " does not divide grid " +
                                std::to_string(tokens.grid_h) + "x" + std::to_string(tokens.grid_w));
  }
  const std::size_t rh = tokens.grid_h / ratio, rw = tokens.grid_w / ratio;
  const std::size_t fy = grid_factor(tokens.map_h, rh, "sr_reduce");
  const std::size_t fx = grid_factor(tokens.map_w, rw, "sr_reduce");

  const Tensor map = tokens_to_map(tokens, tokens.grid_h, tokens.grid_w);
  ReducedTokens out;
  out.features = map_to_rows(strided_conv(map, conv_w, ratio, 0, conv_b));

  out.importance.assign(rh * rw, 0.0f);
  for (std::size_t cy = 0; cy < rh; ++cy) {
    for (std::size_t cx = 0; cx < rw; ++cx) {
      double sum = 0.0;
      for (std::size_t y = cy * fy; y < (cy + 1) * fy; ++y) {
        for (std::size_t x = cx * fx; x < (cx + 1) * fx; ++x) {
          sum += tokens.importance[static_cast<std::size_t>(tokens.pixel_map[y * tokens.map_w + x])];
        }
      }
      out.importance[cy * rw + cx] = static_cast<float>(sum / static_cast<double>(fy * fx));
    }
  }
  return out;
}

TokenSet cr_reduce(const TokenSet& tokens, std::span<const std::int32_t> composed, std::size_t num_clusters,
                   CrAggregation aggregation) {
  const std::size_t n = tokens.size();
  if (composed.size() != n) {
    throw std::invalid_argument("cr_reduce: composed assignment covers " + std::to_string(composed.size()) +
                                " tokens, token set has " + std::to_string(n));
  }
  std::vector<char> covered(num_clusters, 0);
  for (auto a : composed) {
    if (a < 0 || static_cast<std::size_t>(a) >= num_clusters) throw std::invalid_argument("cr_reduce: assignment out of range");
    covered[static_cast<std::size_t>(a)] = 1;
  }
  for (std::size_t f = 0; f < num_clusters; ++f) {
    if (!covered[f]) throw std::invalid_argument("cr_reduce: final cluster " + std::to_string(f) + " has no member");
  }

  const auto logits = segment_logits(tokens.importance, composed, num_clusters);
  SegmentAverager avg(num_clusters, tokens.channels());
  for (std::size_t j = 0; j < n; ++j) {
    const auto s = static_cast<std::size_t>(composed[j]);
    const double w = aggregation == CrAggregation::Mean
                         ? 1.0
                         : std::exp(static_cast<double>(tokens.importance[j]) - static_cast<double>(logits.max[s]));
    const auto x = tokens.features.row(j);
    avg.add(s, w, [&](std::size_t c) { return x[c]; });
  }

  TokenSet out;
  out.features = avg.finish("cr_reduce");
  out.importance = logits.logsumexp;
  out.pixel_map.resize(tokens.pixel_map.size());
  for (std::size_t px = 0; px < tokens.pixel_map.size(); ++px) {
    out.pixel_map[px] = composed[static_cast<std::size_t>(tokens.pixel_map[px])];
  }
  const int final_stage = kNumStages - 1;
  const int shift = std::max(0, final_stage - tokens.stage);
  out.map_h = tokens.map_h;
  out.map_w = tokens.map_w;
  out.grid_h = std::max<std::size_t>(1, tokens.grid_h >> shift);
  out.grid_w = std::max<std::size_t>(1, tokens.grid_w >> shift);
  out.stage = std::max(final_stage, tokens.stage);
  return out;
}

Tensor tokens_to_map(const TokenSet& tokens, std::size_t h, std::size_t w) {
  check_render_grid(tokens, h, w, "tokens_to_map");
  const std::size_t fy = grid_factor(tokens.map_h, h, "tokens_to_map");
  const std::size_t fx = grid_factor(tokens.map_w, w, "tokens_to_map");
  const std::size_t c = tokens.channels();
  Tensor map({c, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t py = y * fy + fy / 2, px = x * fx + fx / 2;
      const auto id = static_cast<std::size_t>(tokens.pixel_map[py * tokens.map_w + px]);
      const auto f = tokens.features.row(id);
      for (std::size_t ch = 0; ch < c; ++ch) map(ch, y, x) = f[ch];
    }
  }
  return map;
}

Tensor map_to_tokens(const Tensor& map, const TokenSet& tokens) {
  if (map.rank() != 3) throw std::invalid_argument("map_to_tokens expects a C x h x w map");
  const std::size_t c = map.dim(0), h = map.dim(1), w = map.dim(2);
  check_render_grid(tokens, h, w, "map_to_tokens");
  const std::size_t fy = grid_factor(tokens.map_h, h, "map_to_tokens");
  const std::size_t fx = grid_factor(tokens.map_w, w, "map_to_tokens");
  SegmentAverager avg(tokens.size(), c);
  for (std::size_t py = 0; py < tokens.map_h; ++py) {
    for (std::size_t px = 0; px < tokens.map_w; ++px) {
      const auto id = static_cast<std::size_t>(tokens.pixel_map[py * tokens.map_w + px]);
      const std::size_t y = py / fy, x = px / fx;
      avg.add(id, 1.0, [&](std::size_t ch) { return map(ch, y, x); });
    }
  }
  return avg.finish("map_to_tokens");
}

}  // namespace tcf
