#include <algorithm>
#include <cstdlib>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "gen.hpp"
#include "tcf/backbone.hpp"
#include "tcf/complexity.hpp"

using tcf::Tensor;
using tcf::TokenSet;

namespace {

tcf::WeightStore block_store(const std::string& prefix, std::size_t dim, std::size_t sr, std::uint64_t seed) {
  std::vector<tcf::WeightSpec> specs;
  tcf::append_block_specs(specs, prefix, dim, 4, sr);
  return tcf::generate_weights(specs, seed);
}

std::vector<std::size_t> counts(const tcf::TokenPyramid& p) {
  std::vector<std::size_t> c;
  for (const auto& s : p.stages) c.push_back(s.size());
  return c;
}

}  // namespace

TEST_CASE("stem geometry") {
  const tcf::Model model(tcf::ModelConfig::tiny(), fixtures::tiny_weights());
  const TokenSet t = model.stem(fixtures::random_image(1, 224, 224));
  CHECK(t.size() == 3136);
  CHECK(t.channels() == 32);
  CHECK(t.map_h == 56);
  CHECK(t.grid_h == 56);
  for (std::size_t i = 0; i < t.pixel_map.size(); ++i) CHECK(t.pixel_map[i] == static_cast<int>(i));
  CHECK(t.importance == std::vector<float>(3136, 0.0f));

  const TokenSet z = model.stem(Tensor({3, 32, 32}));
  for (float v : z.features.data()) CHECK(v == 0.0f);
  CHECK_THROWS(model.forward(Tensor({3, 40, 40})));
}

TEST_CASE("transformer block") {
  std::mt19937_64 g(2);
  TokenSet t = gen::grid(g, 8, 8, 16);
  std::normal_distribution<float> nd;
  for (float& p : t.importance) p = nd(g);
  const tcf::BlockConfig cfg{16, 2, 4, tcf::BlockMode::SR, tcf::CrAggregation::Mean, 1e-6f};

  SUBCASE("zeroed output projections give the identity") {
    auto store = block_store("b", 16, 4, 3);
    fixtures::zero_block_outputs(store, "b");
    const TokenSet out = tcf::transformer_block(t, cfg, tcf::bind_block(store, "b", true));
    CHECK(out.features == t.features);
    CHECK(out.importance == t.importance);
    CHECK(out.pixel_map == t.pixel_map);
  }
  SUBCASE("token count preserved and counters recorded") {
    const auto store = block_store("b", 16, 4, 4);
    tcf::RunContext ctx;
    const TokenSet out = tcf::transformer_block(t, cfg, tcf::bind_block(store, "b", true), {}, 0, &ctx, "b");
    CHECK(out.size() == 64);
    CHECK(out.features != t.features);
    REQUIRE(ctx.kv_counts.size() == 1);
    CHECK(ctx.kv_counts[0].second == 4);
    CHECK(ctx.attention_macs == 2ULL * 64 * 4 * 16);
  }
  SUBCASE("SR with r = 1 equals CR with the identity assignment") {
    TokenSet last = t;
    last.stage = 3;
    const auto store = block_store("b", 16, 1, 5);
    const auto w = tcf::bind_block(store, "b", false);
    tcf::BlockConfig sr = cfg;
    sr.sr_ratio = 1;
    tcf::BlockConfig cr = sr;
    cr.mode = tcf::BlockMode::CR;
    std::vector<std::int32_t> id(64);
    std::iota(id.begin(), id.end(), 0);
    const TokenSet a = tcf::transformer_block(last, sr, w);
    const TokenSet b = tcf::transformer_block(last, cr, w, id, 64);
    CHECK(a.features == b.features);
  }
  SUBCASE("CR mode needs an assignment") {
    const auto store = block_store("b", 16, 1, 5);
    tcf::BlockConfig cr = cfg;
    cr.mode = tcf::BlockMode::CR;
    CHECK_THROWS(tcf::transformer_block(t, cr, tcf::bind_block(store, "b", false)));
  }
}

TEST_CASE("CTM module") {
  const auto config = tcf::ModelConfig::tiny();
  const tcf::Model model(config, fixtures::tiny_weights());
  std::vector<tcf::WeightSpec> specs;
  const auto cc = tcf::ctm_config(config, 0);
  tcf::append_ctm_specs(specs, "ctm0", cc, 4);
  const auto store = tcf::generate_weights(specs, 7);
  const auto w = tcf::bind_ctm(store, "ctm0", false);

  std::mt19937_64 g(8);
  const TokenSet t = gen::grid(g, 16, 16, 32);
  tcf::RunContext ctx;
  const auto out = tcf::ctm_module(t, cc, w, &ctx, "ctm0");
  tcf::validate(out.clusters);
  CHECK(out.tokens.size() == 64);
  CHECK(out.tokens.channels() == 64);
  CHECK(out.clusters.num_parts == 16);
  CHECK(ctx.dist_ops == 16ULL * 16 * 16 * 32);
  CHECK(out.tokens.grid_h == 8);
  CHECK(out.tokens.stage == 1);

  const TokenSet flat = tcf::grid_tokens(Tensor({256, 32}, 0.75f), 16, 16);
  const auto same = tcf::ctm_module(flat, cc, w);
  for (std::size_t i = 1; i < same.tokens.size(); ++i) {
    for (std::size_t c = 0; c < 64; ++c) CHECK(same.tokens.features(i, c) == same.tokens.features(0, c));
  }
}

TEST_CASE("forward pass") {
  const auto config = tcf::ModelConfig::tiny();
  const tcf::Model model(config, fixtures::tiny_weights());

  SUBCASE("token counts") {
    CHECK(counts(model.forward(fixtures::random_image(3, 64, 64))) == std::vector<std::size_t>{256, 64, 16, 4});
    CHECK(counts(model.forward(fixtures::random_image(4, 96, 96))) == std::vector<std::size_t>{576, 144, 36, 9});
    CHECK(counts(model.forward(fixtures::random_image(5, 128, 96))) == std::vector<std::size_t>{768, 192, 48, 12});
  }
  SUBCASE("records, conservation and locality") {
    const auto p = model.forward(fixtures::random_image(6, 96, 64));
    REQUIRE(p.clusters.size() == 3);
    for (std::size_t s = 0; s < 4; ++s) {
      tcf::validate(p.stages[s]);
      const auto areas = tcf::owned_pixel_counts(p.stages[s]);
      CHECK(std::accumulate(areas.begin(), areas.end(), std::size_t{0}) == 24 * 16);
      CHECK(p.stages[s].channels() == config.stages[s].dim);
    }
    for (std::size_t s = 0; s < 3; ++s) {
      tcf::validate(p.clusters[s]);
      CHECK(p.clusters[s].num_parts == static_cast<int>(config.ctm_parts[s]));
      CHECK(p.stages[s + 1].size() == static_cast<std::size_t>(std::llround(p.stages[s].size() * 0.25)));
    }
  }
  SUBCASE("runtime counters match the analytic estimate") {
    const auto p = model.forward(fixtures::random_image(7, 64, 64));
    const auto est = tcf::estimate_complexity(config, 64, 64);
    CHECK(p.dist_ops == est.dist_ops);
    CHECK(p.attention_macs == est.attention_macs);
    CHECK(est.stage_tokens == counts(p));
  }
  SUBCASE("determinism") {
    const Tensor img = fixtures::random_image(8, 64, 64);
    const auto a = model.forward(img), b = model.forward(img);
    for (std::size_t s = 0; s < 4; ++s) CHECK(a.stages[s].features == b.stages[s].features);
    CHECK(model.classify(a) == model.classify(b));
  }
  SUBCASE("missing weights are enumerated") {
    auto store = fixtures::tiny_weights();
    tcf::WeightStore partial;
    for (const auto& [name, t] : store.entries()) {
      if (name != "head.fc.bias" && name != "stem.conv1.weight") partial.insert(name, t);
    }
    try {
      tcf::Model m(config, partial);
      FAIL("expected an error");
    } catch (const std::exception& e) {
      const std::string msg = e.what();
      CHECK(msg.find("head.fc.bias") != std::string::npos);
      CHECK(msg.find("stem.conv1.weight") != std::string::npos);
    }
  }
}

TEST_CASE("classification head") {
  std::mt19937_64 g(9);
  TokenSet t = gen::grid(g, 2, 3, 8);
  tcf::HeadWeights head{{Tensor({8}, 1.0f), Tensor({8}, 0.0f)}, {Tensor({8, 5}), Tensor({5})}};
  CHECK(tcf::classify(t, head) == std::vector<float>(5, 0.0f));

  std::normal_distribution<float> nd;
  for (float& v : head.fc.w.data()) v = nd(g);
  const auto logits = tcf::classify(t, head);
  Tensor perm({6, 8});
  const std::vector<std::size_t> order{4, 2, 0, 5, 1, 3};
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t c = 0; c < 8; ++c) perm(i, c) = t.features(order[i], c);
  const auto logits2 = tcf::classify(tcf::with_features(t, perm), head);
  for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(logits[k] - logits2[k]) < 1e-6f);

  tcf::HeadWeights avg{{Tensor({8}, 1.0f), Tensor({8}, 0.0f)}, {Tensor({8, 1}, 1.0f / 8.0f), Tensor({1})}};
  const Tensor xn = tcf::layer_norm(t.features, avg.norm.gamma, avg.norm.beta);
  double expect = 0.0;
  for (float v : xn.data()) expect += v;
  expect /= 48.0;
  CHECK(tcf::classify(t, avg)[0] == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("forward does not depend on the worker count") {
  const tcf::Model model(tcf::ModelConfig::tiny(), fixtures::tiny_weights());
  const Tensor img = fixtures::random_image(12, 64, 64);
  const char* old = std::getenv("TCF_THREADS");
  const std::string saved = old ? old : "";
  setenv("TCF_THREADS", "1", 1);
  const auto a = model.forward(img);
  setenv("TCF_THREADS", "5", 1);
  const auto b = model.forward(img);
  if (old) setenv("TCF_THREADS", saved.c_str(), 1);
  else unsetenv("TCF_THREADS");
  for (std::size_t s = 0; s < 4; ++s) CHECK(a.stages[s].features == b.stages[s].features);
  for (std::size_t s = 0; s < 3; ++s) CHECK(a.clusters[s].assignment == b.clusters[s].assignment);
}
