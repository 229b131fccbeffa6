#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <vector>

#include "mmforge/image_io.hpp"
#include "mmforge/types.hpp"

namespace mmforge::phash {

inline constexpr int kResizeSide = 32;
inline constexpr int kBlockSide = 8;
// DCT coefficients are snapped to this grid before the median test so the
// hash does not depend on summation order.
inline constexpr double kQuantScale = 65536.0;

using GrayPlane = std::vector<double>;  // row-major

// Luma 0.299 R + 0.587 G + 0.114 B, unrounded.
GrayPlane to_gray(const Raster& raster);

// Exact box-filter (area-average) resize of a gray plane to dst_w x dst_h.
GrayPlane area_resize(const GrayPlane& src, int src_w, int src_h, int dst_w, int dst_h);

// Thresholds an 8x8 block of quantized coefficients against its median and
// packs row-major, first coefficient in the most significant bit.
PHash pack_bits(const std::array<long long, 64>& quantized);

long long quantize(double coefficient);

// Grayscale, 32x32 area resize, unnormalized 2-D DCT-II, top-left 8x8
// block, median threshold. Throws DecodeError on a zero-area raster.
PHash phash64(const Raster& raster);

constexpr int hamming(PHash a, PHash b) { return std::popcount(a.bits ^ b.bits); }

}  // namespace mmforge::phash
