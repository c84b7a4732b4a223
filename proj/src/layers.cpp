#include "tcf/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace tcf {

namespace {

constexpr float kLinearStd = 0.02f;

// He-style fan-out init for convolutions: sqrt(2 / (k * k * out / groups)).
float conv_std(std::size_t k, std::size_t out_per_group) {
  return std::sqrt(2.0f / static_cast<float>(k * k * out_per_group));
}

void add_norm(std::vector<WeightSpec>& out, const std::string& name, std::size_t dim) {
  out.push_back({name + ".weight", {dim}, InitKind::Ones, 0.0f});
  out.push_back({name + ".bias", {dim}, InitKind::Zeros, 0.0f});
}

void add_linear(std::vector<WeightSpec>& out, const std::string& name, std::size_t in, std::size_t outd) {
  out.push_back({name + ".weight", {in, outd}, InitKind::Normal, kLinearStd});
  out.push_back({name + ".bias", {outd}, InitKind::Zeros, 0.0f});
}

void add_attention(std::vector<WeightSpec>& out, const std::string& p, std::size_t in, std::size_t dim,
                   std::size_t sr_ratio) {
  add_linear(out, p + ".q", in, dim);
  add_linear(out, p + ".k", in, dim);
  add_linear(out, p + ".v", in, dim);
  add_linear(out, p + ".proj", dim, dim);
  if (sr_ratio > 1) {
    out.push_back({p + ".sr.weight", {in, in, sr_ratio, sr_ratio}, InitKind::Normal, conv_std(sr_ratio, in)});
    out.push_back({p + ".sr.bias", {in}, InitKind::Zeros, 0.0f});
    add_norm(out, p + ".sr_norm", in);
  }
}

void add_mlp(std::vector<WeightSpec>& out, const std::string& p, std::size_t dim, std::size_t hidden) {
  add_linear(out, p + ".fc1", dim, hidden);
  out.push_back({p + ".dwconv.weight", {hidden, 3, 3}, InitKind::Normal, conv_std(3, 1)});
  out.push_back({p + ".dwconv.bias", {hidden}, InitKind::Zeros, 0.0f});
  add_linear(out, p + ".fc2", hidden, dim);
}

NormWeights bind_norm(const WeightStore& s, const std::string& name) {
  return {s.get(name + ".weight"), s.get(name + ".bias")};
}

LinearWeights bind_linear(const WeightStore& s, const std::string& name) {
  return {s.get(name + ".weight"), s.get(name + ".bias")};
}

AttentionWeights bind_attention(const WeightStore& s, const std::string& p, bool has_sr) {
  AttentionWeights a;
  a.q = bind_linear(s, p + ".q");
  a.k = bind_linear(s, p + ".k");
  a.v = bind_linear(s, p + ".v");
  a.proj = bind_linear(s, p + ".proj");
  a.has_sr = has_sr;
  if (has_sr) {
    a.sr_w = s.get(p + ".sr.weight");
    a.sr_b = s.get(p + ".sr.bias");
    a.sr_norm = bind_norm(s, p + ".sr_norm");
  }
  return a;
}

MlpWeights bind_mlp(const WeightStore& s, const std::string& p) {
  return {bind_linear(s, p + ".fc1"), s.get(p + ".dwconv.weight"), s.get(p + ".dwconv.bias"),
          bind_linear(s, p + ".fc2")};
}

Tensor norm(const Tensor& x, const NormWeights& w, float eps) { return layer_norm(x, w.gamma, w.beta, eps); }

Tensor mlp_forward(const TokenSet& layout, const Tensor& x, const MlpWeights& w) {
  Tensor hidden = w.fc1(x);
  const TokenSet ht = with_features(layout, std::move(hidden));
  const Tensor map = depthwise_conv3x3(tokens_to_map(ht, layout.grid_h, layout.grid_w), w.dw_w, w.dw_b);
  return w.fc2(gelu(map_to_tokens(map, layout)));
}

// Attention from `queries` onto `kv`, returning the projected output.
Tensor attend(const Tensor& queries, const Tensor& kv, std::span<const float> bias, const AttentionWeights& w,
              std::size_t heads, RunContext* ctx, const std::string& name) {
  const Tensor q = w.q(queries);
  const Tensor k = w.k(kv);
  const Tensor v = w.v(kv);
  Tensor weights;
  const bool want = ctx && ctx->attention_sink;
  const Tensor a = biased_attention(q, k, v, bias, heads, want ? &weights : nullptr);
  if (ctx) {
    ctx->attention_macs += 2ULL * q.dim(0) * k.dim(0) * q.dim(1);
    ctx->kv_counts.emplace_back(name, k.dim(0));
    if (want) ctx->attention_sink(name, weights);
  }
  return w.proj(a);
}

}  // namespace

void append_stem_specs(std::vector<WeightSpec>& out, std::size_t dim) {
  const std::size_t half = dim / 2;
  out.push_back({"stem.conv1.weight", {half, 3, 3, 3}, InitKind::Normal, conv_std(3, half)});
  out.push_back({"stem.conv1.bias", {half}, InitKind::Zeros, 0.0f});
  add_norm(out, "stem.norm1", half);
  out.push_back({"stem.conv2.weight", {dim, half, 3, 3}, InitKind::Normal, conv_std(3, dim)});
  out.push_back({"stem.conv2.bias", {dim}, InitKind::Zeros, 0.0f});
  add_norm(out, "stem.norm2", dim);
}

void append_block_specs(std::vector<WeightSpec>& out, const std::string& prefix, std::size_t dim,
                        std::size_t mlp_ratio, std::size_t sr_ratio) {
  add_norm(out, prefix + ".norm1", dim);
  add_attention(out, prefix + ".attn", dim, dim, sr_ratio);
  add_norm(out, prefix + ".norm2", dim);
  add_mlp(out, prefix + ".mlp", dim, dim * mlp_ratio);
}

void append_ctm_specs(std::vector<WeightSpec>& out, const std::string& prefix, const CtmConfig& cfg,
                      std::size_t mlp_ratio) {
  add_norm(out, prefix + ".norm", cfg.in_dim);
  out.push_back({prefix + ".score.weight", {cfg.in_dim, 1}, InitKind::Normal, kLinearStd});
  out.push_back({prefix + ".score.bias", {1}, InitKind::Zeros, 0.0f});
  add_norm(out, prefix + ".norm_q", cfg.in_dim);
  add_norm(out, prefix + ".norm_kv", cfg.in_dim);
  add_linear(out, prefix + ".skip", cfg.in_dim, cfg.out_dim);
  add_attention(out, prefix + ".attn", cfg.in_dim, cfg.out_dim, cfg.key_reduction ? cfg.sr_ratio : 1);
  add_norm(out, prefix + ".norm2", cfg.out_dim);
  add_mlp(out, prefix + ".mlp", cfg.out_dim, cfg.out_dim * mlp_ratio);
}

void append_head_specs(std::vector<WeightSpec>& out, std::size_t dim, std::size_t num_classes) {
  add_norm(out, "head.norm", dim);
  add_linear(out, "head.fc", dim, num_classes);
}

StemWeights bind_stem(const WeightStore& s) {
  return {s.get("stem.conv1.weight"), s.get("stem.conv1.bias"), bind_norm(s, "stem.norm1"),
          s.get("stem.conv2.weight"), s.get("stem.conv2.bias"), bind_norm(s, "stem.norm2")};
}

BlockWeights bind_block(const WeightStore& s, const std::string& prefix, bool has_sr) {
  return {bind_norm(s, prefix + ".norm1"), bind_attention(s, prefix + ".attn", has_sr),
          bind_norm(s, prefix + ".norm2"), bind_mlp(s, prefix + ".mlp")};
}

CtmWeights bind_ctm(const WeightStore& s, const std::string& prefix, bool key_reduction) {
  CtmWeights w;
  w.norm = bind_norm(s, prefix + ".norm");
  w.score_w = s.get(prefix + ".score.weight");
  w.score_b = s.get(prefix + ".score.bias");
  w.norm_q = bind_norm(s, prefix + ".norm_q");
  w.norm_kv = bind_norm(s, prefix + ".norm_kv");
  w.skip = bind_linear(s, prefix + ".skip");
  w.attn = bind_attention(s, prefix + ".attn", key_reduction);
  w.norm2 = bind_norm(s, prefix + ".norm2");
  w.mlp = bind_mlp(s, prefix + ".mlp");
  return w;
}

HeadWeights bind_head(const WeightStore& s) { return {bind_norm(s, "head.norm"), bind_linear(s, "head.fc")}; }

TokenSet stem(const Tensor& image, const StemWeights& w, float eps) {
  if (image.rank() != 3 || image.dim(0) != 3) throw std::invalid_argument("stem expects a 3 x H x W image");
  const std::size_t h = image.dim(1), wd = image.dim(2);
  if (h % 32 != 0 || wd % 32 != 0) {
    throw std::invalid_argument("stem: image " + std::to_string(h) + "x" + std::to_string(wd) +
                                " must have sides divisible by 32");
  }
  Tensor x = strided_conv(image, w.conv1_w, 2, 1, w.conv1_b);
  x = gelu(layer_norm_channels(x, w.norm1.gamma, w.norm1.beta, eps));
  x = strided_conv(x, w.conv2_w, 2, 1, w.conv2_b);
  x = layer_norm_channels(x, w.norm2.gamma, w.norm2.beta, eps);
  const std::size_t gh = x.dim(1), gw = x.dim(2);
  return grid_tokens(map_to_rows(x), gh, gw);
}

TokenSet transformer_block(const TokenSet& tokens, const BlockConfig& cfg, const BlockWeights& w,
                           std::span<const std::int32_t> composed, std::size_t num_final, RunContext* ctx,
                           const std::string& name) {
  if (tokens.channels() != cfg.dim) {
    throw std::invalid_argument(name + ": expected " + std::to_string(cfg.dim) + " channels, got " +
                                std::to_string(tokens.channels()));
  }
  Tensor x = tokens.features;
  const Tensor xn = norm(x, w.norm1, cfg.eps);
  const TokenSet normed = with_features(tokens, xn);

  Tensor kv;
  std::vector<float> bias;
  if (cfg.mode == BlockMode::CR) {
    if (composed.empty() || num_final == 0) throw std::invalid_argument(name + ": CR mode needs a composed assignment");
    TokenSet reduced = cr_reduce(normed, composed, num_final, cfg.cr_aggregation);
    kv = std::move(reduced.features);
    bias = std::move(reduced.importance);
  } else if (cfg.sr_ratio > 1) {
    if (!w.attn.has_sr) throw std::invalid_argument(name + ": SR ratio > 1 but no reduction weights");
    ReducedTokens reduced = sr_reduce(normed, cfg.sr_ratio, w.attn.sr_w, w.attn.sr_b);
    kv = norm(reduced.features, w.attn.sr_norm, cfg.eps);
    bias = std::move(reduced.importance);
  } else {
    kv = xn;
    bias = tokens.importance;
  }

  add_inplace(x, attend(xn, kv, bias, w.attn, cfg.heads, ctx, name + ".attn"));
  add_inplace(x, mlp_forward(tokens, norm(x, w.norm2, cfg.eps), w.mlp));
  return with_features(tokens, std::move(x));
}

CtmOutput ctm_module(const TokenSet& tokens, const CtmConfig& cfg, const CtmWeights& w, RunContext* ctx,
                     const std::string& name) {
  if (tokens.channels() != cfg.in_dim) {
    throw std::invalid_argument(name + ": expected " + std::to_string(cfg.in_dim) + " channels");
  }
  const Tensor x = norm(tokens.features, w.norm, cfg.eps);
  TokenSet src = with_features(tokens, x);
  src.importance = predict_importance(x, w.score_w, w.score_b.data()[0]);

  CtmOutput out;
  out.clusters = cluster_local(src, cfg.parts, cfg.ratio, cfg.knn);
  if (ctx) ctx->dist_ops += out.clusters.dist_ops;
  const TokenSet merged = merge_tokens(src, out.clusters);

  const Tensor queries = norm(merged.features, w.norm_q, cfg.eps);
  const Tensor kv_normed = norm(x, w.norm_kv, cfg.eps);
  Tensor kv;
  std::vector<float> bias;
  if (cfg.key_reduction && cfg.sr_ratio > 1) {
    ReducedTokens reduced = sr_reduce(with_features(src, kv_normed), cfg.sr_ratio, w.attn.sr_w, w.attn.sr_b);
    kv = norm(reduced.features, w.attn.sr_norm, cfg.eps);
    bias = std::move(reduced.importance);
  } else {
    kv = kv_normed;
    bias = src.importance;
  }

  Tensor y = w.skip(merged.features);
  add_inplace(y, attend(queries, kv, bias, w.attn, cfg.heads, ctx, name + ".attn"));
  add_inplace(y, mlp_forward(merged, norm(y, w.norm2, cfg.eps), w.mlp));
  out.tokens = with_features(merged, std::move(y));
  return out;
}

}  // namespace tcf
