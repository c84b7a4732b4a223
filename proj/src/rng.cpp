#include "tcf/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tcf {

std::uint64_t SeededRng::next_u64() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SeededRng::next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double SeededRng::next_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Tensor seeded_normal(SeededRng& rng, Shape shape, float stddev) {
  if (!(stddev > 0.0f)) throw std::invalid_argument("seeded_normal: stddev must be positive");
  Tensor out(std::move(shape));
  for (float& v : out.data()) v = static_cast<float>(rng.next_normal() * stddev);
  ensure_finite(out, "seeded_normal");
  return out;
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t basis) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = basis;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace tcf
