#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcf {

using Shape = std::vector<std::size_t>;

/// Raised when an operation produces NaN or Inf.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major float32 array. Every extent is positive and the flat
/// buffer always holds exactly product(shape) values.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  /// Builds a rank-2 tensor from nested rows (tests and small fixtures).
  static Tensor from_rows(std::initializer_list<std::initializer_list<float>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  const std::vector<float>& values() const { return data_; }

  /// Slice along the leading axis.
  std::span<float> row(std::size_t i);
  std::span<const float> row(std::size_t i) const;

  float& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  float operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  float& operator()(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  float operator()(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Throws NonFiniteError naming `op` if any element is NaN or Inf.
void ensure_finite(const Tensor& t, const char* op);

// Every reduction below sums in ascending index order, one float accumulator
// per output element, so results are bit-reproducible.

Tensor matmul(const Tensor& a, const Tensor& b);

/// x[N x in] * w[in x out] + bias[out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b);

/// Row-wise softmax with max subtraction; exponentials and the row sum are
/// carried in double and each output is rounded once to float.
Tensor softmax_rows(const Tensor& a);

Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, float eps = 1e-6f);

/// GELU, tanh form: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor gelu(const Tensor& a);
float gelu(float x);

/// Per-channel 3x3 cross-correlation, stride 1, zero padding 1.
Tensor depthwise_conv3x3(const Tensor& map, const Tensor& weights, const Tensor& bias);

/// Dense cross-correlation. `bias` may be empty.
Tensor strided_conv(const Tensor& map, const Tensor& weights, std::size_t stride,
                    std::size_t padding, const Tensor& bias = Tensor{});

/// Channel-wise layer norm on a C x H x W map (normalizes each pixel's vector).
Tensor layer_norm_channels(const Tensor& map, const Tensor& gamma, const Tensor& beta,
                           float eps = 1e-6f);

/// C x H x W map to (H*W) x C rows, pixels in raster order.
Tensor map_to_rows(const Tensor& map);
/// (H*W) x C rows back to a C x H x W map.
Tensor rows_to_map(const Tensor& rows, std::size_t h, std::size_t w);

}  // namespace tcf
