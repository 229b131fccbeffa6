#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mmforge/image_io.hpp"
#include "mmforge/phash.hpp"
#include "oracles.hpp"

namespace mmforge {
namespace {

TEST(Hamming, Basics) {
  EXPECT_EQ(phash::hamming(PHash{0x00FF}, PHash{0x0F0F}), 8);
  EXPECT_EQ(phash::hamming(PHash{0}, PHash{~0ULL}), 64);
  EXPECT_EQ(phash::hamming(PHash{123}, PHash{123}), 0);
}

TEST(PHashHex, RoundTrip) {
  const PHash h{0x0123456789abcdefULL};
  EXPECT_EQ(h.hex(), "0123456789abcdef");
  EXPECT_EQ(PHash::from_hex(h.hex()), h);
  EXPECT_EQ(PHash{1}.hex(), "0000000000000001");
  EXPECT_THROW(PHash::from_hex("123"), std::runtime_error);
}

TEST(PHash, ConstantImageSetsOnlyDcBit) {
  EXPECT_EQ(phash::phash64(testing::solid_image(64, 64, 90)).bits, 0x8000000000000000ULL);
}

TEST(PHash, ZeroAreaThrows) { EXPECT_THROW(phash::phash64(Raster{}), DecodeError); }

TEST(PHash, AreaResizePreservesMean) {
  Rng rng(3);
  const Raster r = testing::noise_image(97, 61, rng);
  const auto g = phash::to_gray(r);
  const auto small = phash::area_resize(g, 97, 61, 32, 32);
  double a = 0, b = 0;
  for (double v : g) a += v;
  for (double v : small) b += v;
  EXPECT_NEAR(a / g.size(), b / small.size(), 1e-9);
}

TEST(PHash, AgreesWithNaiveReference) {
  Rng rng(77);
  for (int t = 0; t < 12; ++t) {
    const int w = 40 + static_cast<int>(rng.below(300));
    const int h = 40 + static_cast<int>(rng.below(300));
    const Raster r = t % 3 == 0 ? testing::noise_image(w, h, rng) : testing::smooth_image(w, h, rng);
    EXPECT_EQ(phash::phash64(r), testing::naive_phash(r)) << w << "x" << h;
  }
  // Smaller than the 32x32 grid.
  const Raster tiny = testing::noise_image(7, 5, rng);
  EXPECT_EQ(phash::phash64(tiny), testing::naive_phash(tiny));
}

TEST(PHash, DecodedPngHashesLikeRaster) {
  Rng rng(8);
  const Raster r = testing::smooth_image(200, 150, rng);
  const auto png = encode_png(r);
  EXPECT_EQ(sniff_format(png), ImageFormat::png);
  const Raster back = decode_image(png);
  EXPECT_EQ(back.rgb, r.rgb);
  EXPECT_EQ(phash::phash64(back), phash::phash64(r));
  // A nonce chunk changes the bytes but not the pixels.
  const auto tagged = testing::png_with_nonce(png, 17);
  EXPECT_NE(tagged, png);
  EXPECT_EQ(decode_image(tagged).rgb, r.rgb);
}

TEST(ImageIo, RejectsGarbage) {
  const std::vector<std::uint8_t> junk = {'G', 'I', 'F', '8', '9', 'a', 0, 0};
  EXPECT_EQ(sniff_format(junk), ImageFormat::unknown);
  EXPECT_THROW(decode_image(junk), DecodeError);
  std::vector<std::uint8_t> truncated = encode_png(testing::solid_image(20, 20, 1));
  truncated.resize(truncated.size() / 2);
  EXPECT_THROW(decode_image(truncated), DecodeError);
}

}  // namespace
}  // namespace mmforge
