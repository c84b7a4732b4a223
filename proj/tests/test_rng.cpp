#include <cmath>
#include <cstring>

#include "doctest.h"
#include "tcf/rng.hpp"
#include "tcf/weights.hpp"

TEST_CASE("splitmix64 reference stream") {
  // Reference values from an independent Python splitmix64.
  tcf::SeededRng rng(42);
  CHECK(rng.next_u64() == 0xbdd732262feb6e95ULL);
  CHECK(rng.next_u64() == 0x28efe333b266f103ULL);
  CHECK(rng.next_u64() == 0x47526757130f9f52ULL);
  CHECK(tcf::SeededRng(0).next_u64() == 0xe220a8397b1dcdafULL);
}

TEST_CASE("Box-Muller pair") {
  tcf::SeededRng rng(42);
  CHECK(rng.next_normal() == doctest::Approx(0.4147197504315305).epsilon(1e-14));
  CHECK(rng.next_normal() == doctest::Approx(0.6526812221519427).epsilon(1e-14));
  CHECK(rng.state() == 42 + 2 * 0x9E3779B97F4A7C15ULL);
}

TEST_CASE("seeded_normal determinism and moments") {
  tcf::SeededRng a(9), b(9);
  CHECK(tcf::seeded_normal(a, {4, 8}, 0.5f) == tcf::seeded_normal(b, {4, 8}, 0.5f));

  tcf::SeededRng rng(2024);
  const tcf::Tensor t = tcf::seeded_normal(rng, {100000}, 1.0f);
  double m = 0.0, v = 0.0;
  for (float x : t.data()) m += x;
  m /= static_cast<double>(t.size());
  for (float x : t.data()) v += (x - m) * (x - m);
  const double sd = std::sqrt(v / static_cast<double>(t.size()));
  CHECK(std::abs(m) < 0.02);
  CHECK(std::abs(sd - 1.0) < 0.02);
  CHECK_THROWS(tcf::seeded_normal(rng, {2}, 0.0f));
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(tcf::fnv1a64("", 0) == 0xcbf29ce484222325ULL);
  CHECK(tcf::fnv1a64("a", 1) == 0xaf63dc4c8601ec8cULL);
  CHECK(tcf::fnv1a64("foobar", 6) == 0x85944171f73967e8ULL);
}

TEST_CASE("generated weights do not depend on spec order") {
  std::vector<tcf::WeightSpec> specs{{"a.weight", {3, 4}, tcf::InitKind::Normal, 0.02f},
                                     {"a.bias", {4}, tcf::InitKind::Zeros, 0.0f},
                                     {"n.gamma", {4}, tcf::InitKind::Ones, 0.0f}};
  const auto s1 = tcf::generate_weights(specs, 5);
  std::swap(specs[0], specs[2]);
  const auto s2 = tcf::generate_weights(specs, 5);
  CHECK(s1 == s2);
  CHECK(s1.get("n.gamma") == tcf::Tensor({4}, 1.0f));
  CHECK(s1.get("a.bias") == tcf::Tensor({4}, 0.0f));
  CHECK_FALSE(tcf::generate_weights(specs, 6) == s1);
}

TEST_CASE("fixture weight stream matches an external reimplementation") {
  // First values of stem.conv1.weight for seed 0, produced by a separate
  // Python splitmix64 + Box-Muller script seeded with fnv1a64(name).
  std::vector<tcf::WeightSpec> specs{{"stem.conv1.weight", {16, 3, 3, 3}, tcf::InitKind::Normal,
                                      std::sqrt(2.0f / 144.0f)}};
  const auto t = tcf::generate_weights(specs, 0).get("stem.conv1.weight");
  CHECK(t.data()[0] == 0.09688874334096909f);
  CHECK(t.data()[1] == -0.08880700170993805f);
  CHECK(t.data()[2] == 0.15303978323936462f);
  CHECK(t.data()[3] == 0.01404585037380457f);
}
