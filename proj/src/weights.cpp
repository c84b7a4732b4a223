#include "tcf/weights.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "tcf/rng.hpp"

namespace tcf {

void WeightStore::insert(const std::string& name, Tensor tensor) {
  if (!tensors_.emplace(name, std::move(tensor)).second) {
    throw std::invalid_argument("duplicate weight name '" + name + "'");
  }
}

const Tensor& WeightStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("missing weight '" + name + "'");
  return it->second;
}

Tensor& WeightStore::get_mut(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("missing weight '" + name + "'");
  return it->second;
}

void WeightStore::require(const std::vector<std::pair<std::string, Shape>>& expected) const {
  std::string missing, mismatched;
  std::size_t n_missing = 0;
  for (const auto& [name, shape] : expected) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) {
      missing += (n_missing++ ? ", " : "") + name;
    } else if (it->second.shape() != shape) {
      mismatched += (mismatched.empty() ? "" : ", ") + name + " " + shape_string(it->second.shape()) +
                    " (expected " + shape_string(shape) + ")";
    }
  }
  if (n_missing || !mismatched.empty()) {
    std::string msg = "weight store incomplete:";
    if (n_missing) msg += " missing " + std::to_string(n_missing) + " tensor(s): " + missing + ";";
    if (!mismatched.empty()) msg += " wrong shape: " + mismatched + ";";
    throw std::invalid_argument(msg);
  }
}

WeightStore generate_weights(const std::vector<WeightSpec>& specs, std::uint64_t seed) {
  WeightStore store;
  for (const auto& spec : specs) {
    switch (spec.init) {
      case InitKind::Zeros:
        store.insert(spec.name, Tensor(spec.shape, 0.0f));
        break;
      case InitKind::Ones:
        store.insert(spec.name, Tensor(spec.shape, 1.0f));
        break;
      case InitKind::Normal: {
        SeededRng rng(seed ^ fnv1a64(spec.name.data(), spec.name.size()));
        store.insert(spec.name, seeded_normal(rng, spec.shape, spec.stddev));
        break;
      }
    }
  }
  return store;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

constexpr char kMagic[] = {'T', 'C', 'F', 'W', '1'};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw std::runtime_error("weight file truncated at byte " + std::to_string(pos_));
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_weights(const WeightStore& store) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, t] : store.entries()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    for (float f : t.data()) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      put_u32(out, bits);
    }
  }
  return out;
}

WeightStore deserialize_weights(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.str(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) throw std::runtime_error("bad magic: not a TCFW1 weight file");
  const std::uint32_t count = r.u32();
  WeightStore store;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::string name = r.str(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank == 0) throw std::runtime_error("weight '" + name + "' has rank 0");
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = r.u32();
      if (d == 0) throw std::runtime_error("weight '" + name + "' has a zero extent");
      numel *= d;
      if (numel > bytes.size()) throw std::runtime_error("weight file truncated in '" + name + "'");
    }
    std::vector<float> data(numel);
    for (auto& f : data) f = r.f32();
    if (store.contains(name)) throw std::runtime_error("duplicate weight name '" + name + "'");
    store.insert(name, Tensor(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw std::runtime_error("trailing bytes after last weight entry");
  return store;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

void save_weights(const WeightStore& store, const std::string& path) { write_file_bytes(path, serialize_weights(store)); }

WeightStore load_weights(const std::string& path) { return deserialize_weights(read_file_bytes(path)); }

std::uint64_t content_hash(const WeightStore& store) {
  const auto bytes = serialize_weights(store);
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace tcf
