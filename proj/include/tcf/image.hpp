#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcf/tensor.hpp"

namespace tcf {

/// 8-bit interleaved RGB raster.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  bool operator==(const RgbImage&) const = default;
};

/// Binary PPM (P6, maxval 255). Header tokens are separated by whitespace
/// (space, \t, \n, \v, \f, \r); '#' starts a comment running to the end of the
/// line. Exactly one whitespace byte follows maxval, then the raw triplets.
RgbImage decode_ppm(const std::vector<std::uint8_t>& bytes);

/// Canonical header "P6\n<w> <h>\n255\n".
std::vector<std::uint8_t> encode_ppm(const RgbImage& image);

/// Channels-first floats in [0, 1].
Tensor image_to_tensor(const RgbImage& image);
/// Clamps to [0, 1] and rounds to the nearest 8-bit level.
RgbImage tensor_to_image(const Tensor& chw);

Tensor load_ppm(const std::string& path);
void save_ppm(const Tensor& chw, const std::string& path);
void save_ppm(const RgbImage& image, const std::string& path);

}  // namespace tcf
