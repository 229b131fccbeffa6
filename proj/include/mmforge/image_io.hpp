#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace mmforge {

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 8-bit interleaved RGB raster.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // width * height * 3

  std::uint8_t* pixel(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
};

enum class ImageFormat { unknown, png, jpeg };

ImageFormat sniff_format(std::span<const std::uint8_t> bytes);

// Decodes PNG or JPEG bytes. Throws DecodeError on anything else.
Raster decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const Raster& raster);

}  // namespace mmforge
