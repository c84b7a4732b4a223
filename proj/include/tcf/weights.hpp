#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tcf/tensor.hpp"

namespace tcf {

/// Named tensor table. Iteration order is lexicographic by name, so the
/// serialized form is independent of insertion order.
class WeightStore {
 public:
  /// Throws std::invalid_argument on a duplicate name.
  void insert(const std::string& name, Tensor tensor);
  void insert_or_assign(const std::string& name, Tensor tensor) { tensors_.insert_or_assign(name, std::move(tensor)); }

  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get_mut(const std::string& name);

  std::size_t size() const { return tensors_.size(); }
  const std::map<std::string, Tensor>& entries() const { return tensors_; }

  /// Throws one error listing every missing name, and any name present with
  /// the wrong shape.
  void require(const std::vector<std::pair<std::string, Shape>>& expected) const;

  bool operator==(const WeightStore& other) const = default;

 private:
  std::map<std::string, Tensor> tensors_;
};

enum class InitKind { Zeros, Ones, Normal };

struct WeightSpec {
  std::string name;
  Shape shape;
  InitKind init = InitKind::Zeros;
  float stddev = 0.0f;
};

/// Fills every spec. A Normal tensor draws from its own splitmix64 stream
/// seeded with seed XOR fnv1a64(name), so values do not depend on the spec
/// order.
WeightStore generate_weights(const std::vector<WeightSpec>& specs, std::uint64_t seed);

/// TCFW1 container, little endian:
///   "TCFW1" | u32 count | per entry: u32 name_len, name bytes (UTF-8),
///   u32 rank, u32 extents[rank], f32 payload[product(extents)]
std::vector<std::uint8_t> serialize_weights(const WeightStore& store);
WeightStore deserialize_weights(const std::vector<std::uint8_t>& bytes);

void save_weights(const WeightStore& store, const std::string& path);
WeightStore load_weights(const std::string& path);

/// FNV-1a 64 of the serialized container.
std::uint64_t content_hash(const WeightStore& store);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace tcf
