#include "mmforge/phash.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mmforge::phash {
namespace {

// weights[k * src + x] = overlap of source pixel x with destination cell k.
std::vector<double> box_weights(int src, int dst) {
  std::vector<double> w(static_cast<std::size_t>(src) * dst, 0.0);
  for (int k = 0; k < dst; ++k) {
    const double lo = static_cast<double>(k) * src / dst;
    const double hi = static_cast<double>(k + 1) * src / dst;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(src - 1, static_cast<int>(std::ceil(hi)) - 1);
    for (int x = first; x <= last; ++x) {
      const double overlap = std::min<double>(x + 1, hi) - std::max<double>(x, lo);
      if (overlap > 0) w[static_cast<std::size_t>(k) * src + x] = overlap;
    }
  }
  return w;
}

}  // namespace

GrayPlane to_gray(const Raster& raster) {
  GrayPlane g(static_cast<std::size_t>(raster.width) * raster.height);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const std::uint8_t* p = raster.rgb.data() + i * 3;
    g[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return g;
}

GrayPlane area_resize(const GrayPlane& src, int src_w, int src_h, int dst_w, int dst_h) {
  const std::vector<double> wx = box_weights(src_w, dst_w);
  const std::vector<double> wy = box_weights(src_h, dst_h);
  // Horizontal pass: src_h x dst_w.
  GrayPlane tmp(static_cast<std::size_t>(src_h) * dst_w, 0.0);
  for (int y = 0; y < src_h; ++y) {
    const double* row = src.data() + static_cast<std::size_t>(y) * src_w;
    for (int k = 0; k < dst_w; ++k) {
      const double* w = wx.data() + static_cast<std::size_t>(k) * src_w;
      double acc = 0.0;
      for (int x = 0; x < src_w; ++x) acc += w[x] * row[x];
      tmp[static_cast<std::size_t>(y) * dst_w + k] = acc;
    }
  }
  const double cell_area = (static_cast<double>(src_w) / dst_w) * (static_cast<double>(src_h) / dst_h);
  GrayPlane out(static_cast<std::size_t>(dst_w) * dst_h, 0.0);
  for (int k = 0; k < dst_h; ++k) {
    const double* w = wy.data() + static_cast<std::size_t>(k) * src_h;
    for (int x = 0; x < dst_w; ++x) {
      double acc = 0.0;
      for (int y = 0; y < src_h; ++y) acc += w[y] * tmp[static_cast<std::size_t>(y) * dst_w + x];
      out[static_cast<std::size_t>(k) * dst_w + x] = acc / cell_area;
    }
  }
  return out;
}

long long quantize(double coefficient) { return std::llround(coefficient * kQuantScale); }

PHash pack_bits(const std::array<long long, 64>& quantized) {
  std::array<long long, 64> sorted = quantized;
  std::sort(sorted.begin(), sorted.end());
  // coefficient > median  <=>  2 * coefficient > sorted[31] + sorted[32]
  const long long twice_median = sorted[31] + sorted[32];
  std::uint64_t bits = 0;
  for (int i = 0; i < 64; ++i) {
    bits <<= 1;
    if (2 * quantized[i] > twice_median) bits |= 1;
  }
  return PHash{bits};
}

PHash phash64(const Raster& raster) {
  if (raster.width <= 0 || raster.height <= 0) throw DecodeError("phash of zero-area image");
  constexpr int N = kResizeSide;
  const GrayPlane small = area_resize(to_gray(raster), raster.width, raster.height, N, N);

  // basis[u * N + n] = cos(pi * (2n + 1) * u / (2N))
  static const std::vector<double> basis = [] {
    std::vector<double> b(N * N);
    for (int u = 0; u < N; ++u) {
      for (int n = 0; n < N; ++n) {
        b[u * N + n] = std::cos(std::numbers::pi * (2 * n + 1) * u / (2.0 * N));
      }
    }
    return b;
  }();

  // Row transform, keeping only the first kBlockSide frequencies.
  std::array<double, N * kBlockSide> rows{};
  for (int y = 0; y < N; ++y) {
    for (int v = 0; v < kBlockSide; ++v) {
      double acc = 0.0;
      for (int x = 0; x < N; ++x) acc += small[y * N + x] * basis[v * N + x];
      rows[y * kBlockSide + v] = acc;
    }
  }
  std::array<long long, 64> q{};
  for (int u = 0; u < kBlockSide; ++u) {
    for (int v = 0; v < kBlockSide; ++v) {
      double acc = 0.0;
      for (int y = 0; y < N; ++y) acc += rows[y * kBlockSide + v] * basis[u * N + y];
      q[u * kBlockSide + v] = quantize(acc);
    }
  }
  return pack_bits(q);
}

}  // namespace mmforge::phash
