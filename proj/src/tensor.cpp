#include "tcf/tensor.hpp"

#include <cmath>
#include <sstream>

#include "tcf/parallel.hpp"

namespace tcf {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_extents(const Shape& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have rank >= 1");
  for (auto e : shape) {
    if (e == 0) throw std::invalid_argument("tensor extents must be positive: " + shape_string(shape));
  }
}

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (data_.size() != shape_numel(shape_)) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<float>> rows) {
  const std::size_t n = rows.size();
  const std::size_t c = n ? rows.begin()->size() : 0;
  std::vector<float> data;
  data.reserve(n * c);
  for (const auto& r : rows) {
    if (r.size() != c) throw std::invalid_argument("ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({n, c}, std::move(data));
}

std::span<float> Tensor::row(std::size_t i) {
  const std::size_t stride = data_.size() / shape_[0];
  return std::span<float>(data_).subspan(i * stride, stride);
}

std::span<const float> Tensor::row(std::size_t i) const {
  const std::size_t stride = data_.size() / shape_[0];
  return std::span<const float>(data_).subspan(i * stride, stride);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw std::invalid_argument("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void ensure_finite(const Tensor& t, const char* op) {
  for (float v : t.data()) {
    if (!std::isfinite(v)) throw NonFiniteError(std::string(op) + ": non-finite value in output");
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul expects rank-2 operands");
  require(a.dim(1) == b.dim(0),
          "matmul shape mismatch: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  const float* bp = b.data().data();
  parallel_for(
      m,
      [&](std::size_t i) {
        const float* arow = a.data().data() + i * k;
        float* orow = out.data().data() + i * n;
        // i-k-j order keeps the per-element sum ascending in k.
        for (std::size_t kk = 0; kk < k; ++kk) {
          const float av = arow[kk];
          const float* brow = bp + kk * n;
          for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
      },
      16);
  ensure_finite(out, "matmul");
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  Tensor out = matmul(x, w);
  require(bias.size() == out.dim(1), "linear bias length mismatch");
  const std::size_t n = out.dim(1);
  for (std::size_t i = 0; i < out.dim(0); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < n; ++j) r[j] += bias.data()[j];
  }
  ensure_finite(out, "linear");
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(),
          "add shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += bd[i];
  ensure_finite(a, "add");
}

Tensor softmax_rows(const Tensor& a) {
  require(a.rank() == 2, "softmax_rows expects a rank-2 tensor");
  ensure_finite(a, "softmax_rows input");
  Tensor out(a.shape());
  const std::size_t n = a.dim(1);
  std::vector<double> e(n);
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    auto in = a.row(i);
    auto o = out.row(i);
    float mx = in[0];
    for (float v : in) mx = std::max(mx, v);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      e[j] = std::exp(static_cast<double>(in[j]) - static_cast<double>(mx));
      sum += e[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] = static_cast<float>(e[j] / sum);
  }
  return out;
}

Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, float eps) {
  require(a.rank() == 2, "layer_norm expects N x C");
  require(eps > 0.0f, "layer_norm eps must be positive");
  const std::size_t c = a.dim(1);
  require(gamma.size() == c && beta.size() == c, "layer_norm affine length mismatch");
  Tensor out(a.shape());
  const auto g = gamma.data();
  const auto b = beta.data();
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    auto in = a.row(i);
    auto o = out.row(i);
    float mean = 0.0f;
    for (float v : in) mean += v;
    mean /= static_cast<float>(c);
    float var = 0.0f;
    for (float v : in) var += (v - mean) * (v - mean);
    var /= static_cast<float>(c);
    const float inv = 1.0f / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) o[j] = (in[j] - mean) * inv * g[j] + b[j];
  }
  ensure_finite(out, "layer_norm");
  return out;
}

float gelu(float x) {
  constexpr float kSqrt2OverPi = 0.7978845608028654f;
  constexpr float kCubic = 0.044715f;
  return 0.5f * x * (1.0f + std::tanh(kSqrt2OverPi * (x + kCubic * x * x * x)));
}

Tensor gelu(const Tensor& a) {
  Tensor out = a;
  for (float& v : out.data()) v = gelu(v);
  ensure_finite(out, "gelu");
  return out;
}

Tensor depthwise_conv3x3(const Tensor& map, const Tensor& weights, const Tensor& bias) {
  require(map.rank() == 3, "depthwise_conv3x3 expects a C x H x W map");
  const std::size_t c = map.dim(0), h = map.dim(1), w = map.dim(2);
  require(weights.shape() == Shape({c, 3, 3}), "depthwise_conv3x3 weights must be C x 3 x 3");
  require(bias.size() == c, "depthwise_conv3x3 bias length mismatch");
  Tensor out(map.shape());
  parallel_for(c, [&](std::size_t ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        float acc = 0.0f;
        for (std::size_t ky = 0; ky < 3; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - 1;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            acc += weights(ch, ky, kx) * map(ch, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
          }
        }
        out(ch, y, x) = acc + bias.data()[ch];
      }
    }
  });
  ensure_finite(out, "depthwise_conv3x3");
  return out;
}

Tensor strided_conv(const Tensor& map, const Tensor& weights, std::size_t stride, std::size_t padding,
                    const Tensor& bias) {
  require(map.rank() == 3, "strided_conv expects a Cin x H x W map");
  require(weights.rank() == 4, "strided_conv weights must be Cout x Cin x k x k");
  const std::size_t cin = map.dim(0), h = map.dim(1), w = map.dim(2);
  const std::size_t cout = weights.dim(0), k = weights.dim(2);
  require(weights.dim(1) == cin && weights.dim(3) == k, "strided_conv weight shape mismatch");
  require(stride >= 1, "strided_conv stride must be >= 1");
  require(bias.empty() || bias.size() == cout, "strided_conv bias length mismatch");
  require(h + 2 * padding >= k && w + 2 * padding >= k,
          "strided_conv invalid geometry: kernel larger than padded input");
  const std::size_t oh = (h + 2 * padding - k) / stride + 1;
  const std::size_t ow = (w + 2 * padding - k) / stride + 1;
  Tensor out({cout, oh, ow});
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  parallel_for(cout, [&](std::size_t co) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        float acc = 0.0f;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              acc += weights.data()[((co * cin + ci) * k + ky) * k + kx] *
                     map(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            }
          }
        }
        out(co, oy, ox) = bias.empty() ? acc : acc + bias.data()[co];
      }
    }
  });
  ensure_finite(out, "strided_conv");
  return out;
}

Tensor map_to_rows(const Tensor& map) {
  require(map.rank() == 3, "map_to_rows expects C x H x W");
  const std::size_t c = map.dim(0), hw = map.dim(1) * map.dim(2);
  Tensor rows({hw, c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < hw; ++p) rows.data()[p * c + ch] = map.data()[ch * hw + p];
  }
  return rows;
}

Tensor rows_to_map(const Tensor& rows, std::size_t h, std::size_t w) {
  require(rows.rank() == 2 && rows.dim(0) == h * w, "rows_to_map geometry mismatch");
  const std::size_t c = rows.dim(1), hw = h * w;
  Tensor map({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < hw; ++p) map.data()[ch * hw + p] = rows.data()[p * c + ch];
  }
  return map;
}

Tensor layer_norm_channels(const Tensor& map, const Tensor& gamma, const Tensor& beta, float eps) {
  require(map.rank() == 3, "layer_norm_channels expects C x H x W");
  return rows_to_map(layer_norm(map_to_rows(map), gamma, beta, eps), map.dim(1), map.dim(2));
}

}  // namespace tcf
