#include "tcf/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tcf/weights.hpp"

namespace tcf {

namespace {

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r'; }

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& b) : b_(b) {}

  void skip_separators() {
    while (pos_ < b_.size()) {
      if (is_space(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n' && b_[pos_] != '\r') ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_separators();
    if (pos_ >= b_.size()) throw std::runtime_error(std::string("malformed PPM header: missing ") + what);
    if (b_[pos_] < '0' || b_[pos_] > '9') throw std::runtime_error(std::string("malformed PPM header: bad ") + what);
    std::size_t v = 0;
    while (pos_ < b_.size() && b_[pos_] >= '0' && b_[pos_] <= '9') {
      v = v * 10 + static_cast<std::size_t>(b_[pos_] - '0');
      if (v > (1u << 24)) throw std::runtime_error(std::string("malformed PPM header: ") + what + " too large");
      ++pos_;
    }
    return v;
  }

  std::size_t pos_ = 0;

 private:
  const std::vector<std::uint8_t>& b_;
};

}  // namespace

RgbImage decode_ppm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw std::runtime_error("malformed PPM header: magic is not P6");
  HeaderReader r(bytes);
  r.pos_ = 2;
  if (r.pos_ >= bytes.size() || !(is_space(bytes[r.pos_]) || bytes[r.pos_] == '#')) {
    throw std::runtime_error("malformed PPM header: no separator after magic");
  }
  RgbImage img;
  img.width = r.number("width");
  img.height = r.number("height");
  const std::size_t maxval = r.number("maxval");
  if (img.width == 0 || img.height == 0) throw std::runtime_error("malformed PPM header: zero dimension");
  if (maxval != 255) throw std::runtime_error("unsupported PPM maxval " + std::to_string(maxval) + " (only 255)");
  if (r.pos_ >= bytes.size() || !is_space(bytes[r.pos_])) {
    throw std::runtime_error("malformed PPM header: maxval must be followed by one whitespace byte");
  }
  ++r.pos_;
  const std::size_t payload = img.width * img.height * 3;
  if (bytes.size() - r.pos_ < payload) {
    throw std::runtime_error("truncated PPM payload: expected " + std::to_string(payload) + " bytes, found " +
                             std::to_string(bytes.size() - r.pos_));
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos_),
                    bytes.begin() + static_cast<std::ptrdiff_t>(r.pos_ + payload));
  return img;
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& image) {
  if (image.pixels.size() != image.width * image.height * 3) throw std::invalid_argument("encode_ppm: pixel buffer size mismatch");
  const std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

Tensor image_to_tensor(const RgbImage& image) {
  const std::size_t h = image.height, w = image.width;
  Tensor t({3, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) t(c, y, x) = static_cast<float>(image.pixels[(y * w + x) * 3 + c]) / 255.0f;
    }
  }
  return t;
}

RgbImage tensor_to_image(const Tensor& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) throw std::invalid_argument("tensor_to_image expects 3 x H x W");
  RgbImage img;
  img.height = chw.dim(1);
  img.width = chw.dim(2);
  img.pixels.resize(img.width * img.height * 3);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const float v = std::clamp(chw(c, y, x), 0.0f, 1.0f);
        img.pixels[(y * img.width + x) * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  return img;
}

Tensor load_ppm(const std::string& path) { return image_to_tensor(decode_ppm(read_file_bytes(path))); }

void save_ppm(const Tensor& chw, const std::string& path) { save_ppm(tensor_to_image(chw), path); }

void save_ppm(const RgbImage& image, const std::string& path) { write_file_bytes(path, encode_ppm(image)); }

}  // namespace tcf
