#pragma once

#include <cstdint>

#include "tcf/tensor.hpp"

namespace tcf {

/// splitmix64 stream. Identical seeds give identical streams everywhere.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double next_unit();

  /// Standard normal via Box-Muller. Each pair of calls consumes two
  /// splitmix64 outputs: u1 = ((a >> 11) + 1) * 2^-53 in (0, 1],
  /// u2 = (b >> 11) * 2^-53, r = sqrt(-2 ln u1); the first call returns
  /// r cos(2 pi u2), the second r sin(2 pi u2).
  double next_normal();

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Tensor of N(0, stddev^2) samples drawn in row-major order.
Tensor seeded_normal(SeededRng& rng, Shape shape, float stddev);

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace tcf
