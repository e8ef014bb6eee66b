#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "visage/image.hpp"

using namespace visage;

namespace {

Image random_gray(std::mt19937_64& rng, int w, int h) {
  Image img(w, h, 1);
  for (auto& v : img.data()) v = std::uint8_t(rng() & 0xFF);
  return img;
}

// Naive oracle: the definition of the table entry.
std::int64_t naive_prefix(const Image& img, int x, int y) {
  std::int64_t s = 0;
  for (int j = 0; j < y; ++j)
    for (int i = 0; i < x; ++i) s += img.at(i, j);
  return s;
}

std::int64_t naive_rect(const Image& img, const Rect& r) {
  std::int64_t s = 0;
  for (int j = r.y; j < r.y + r.h; ++j)
    for (int i = r.x; i < r.x + r.w; ++i) s += img.at(i, j);
  return s;
}

Rect random_rect(std::mt19937_64& rng, int w, int h) {
  const int x0 = int(rng() % std::uint64_t(w + 1)), x1 = int(rng() % std::uint64_t(w + 1));
  const int y0 = int(rng() % std::uint64_t(h + 1)), y1 = int(rng() % std::uint64_t(h + 1));
  return {std::min(x0, x1), std::min(y0, y1), std::abs(x1 - x0), std::abs(y1 - y0)};
}

// Written out as the plain 3x3 correlation with clamped reads.
std::int32_t direct_sobel(const Image& img, int x, int y, bool dx) {
  static const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  static const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  std::int32_t s = 0;
  for (int j = -1; j <= 1; ++j)
    for (int i = -1; i <= 1; ++i) {
      const int xx = std::clamp(x + i, 0, img.width() - 1);
      const int yy = std::clamp(y + j, 0, img.height() - 1);
      s += (dx ? kx[j + 1][i + 1] : ky[j + 1][i + 1]) * img.at(xx, yy);
    }
  return s;
}

}  // namespace

TEST(Image, RejectsBadShape) {
  EXPECT_THROW(Image(0, 4, 1), Error);
  EXPECT_THROW(Image(4, 4, 2), Error);
  Image ok(3, 2, 3);
  EXPECT_EQ(ok.data().size(), 18u);
}

TEST(Grayscale, BlackWhiteRed) {
  Image black(4, 4, 3, 0), white(4, 4, 3, 255);
  const Image gb = to_grayscale(black), gw = to_grayscale(white);
  for (auto v : gb.data()) EXPECT_EQ(v, 0);
  for (auto v : gw.data()) EXPECT_EQ(v, 255);
  Image red(1, 1, 3, 0);
  red.at(0, 0, 0) = 255;
  EXPECT_EQ(to_grayscale(red).at(0, 0), 76);
}

TEST(Grayscale, MatchesRoundedLumaAndStaysInRange) {
  std::mt19937_64 rng(3);
  Image img(32, 32, 3);
  for (auto& v : img.data()) v = std::uint8_t(rng() & 0xFF);
  const Image g = to_grayscale(img);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const double luma = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
      EXPECT_EQ(g.at(x, y), int(std::lround(luma)));
    }
}

TEST(Grayscale, RejectsGrayInput) { EXPECT_THROW(to_grayscale(Image(2, 2, 1)), Error); }

TEST(Integral, ZeroAndOnes) {
  const IntegralImage z = integral(Image(4, 4, 1, 0));
  for (int y = 0; y <= 4; ++y)
    for (int x = 0; x <= 4; ++x) EXPECT_EQ(z.at(x, y), 0);
  const IntegralImage o = integral(Image(2, 2, 1, 1));
  EXPECT_EQ(o.at(2, 2), 4);
  EXPECT_EQ(rect_sum(o, {0, 0, 2, 2}), 4);
}

TEST(Integral, RandomMatchesNaivePrefix) {
  std::mt19937_64 rng(5);
  const Image img = random_gray(rng, 8, 8);
  const IntegralImage ii = integral(img);
  for (int y = 0; y <= 8; ++y)
    for (int x = 0; x <= 8; ++x) EXPECT_EQ(ii.at(x, y), naive_prefix(img, x, y));
  for (int i = 0; i <= 8; ++i) {
    EXPECT_EQ(ii.at(i, 0), 0);
    EXPECT_EQ(ii.at(0, i), 0);
  }
}

TEST(Integral, MonotoneForNonNegativeSources) {
  std::mt19937_64 rng(6);
  const IntegralImage ii = integral(random_gray(rng, 20, 13));
  for (int y = 0; y <= 13; ++y)
    for (int x = 0; x <= 20; ++x) {
      if (x > 0) {
        EXPECT_GE(ii.at(x, y), ii.at(x - 1, y));
      }
      if (y > 0) {
        EXPECT_GE(ii.at(x, y), ii.at(x, y - 1));
      }
    }
}

TEST(RectSum, ExhaustiveOnSmallImages) {
  std::mt19937_64 rng(7);
  for (int w = 1; w <= 8; ++w)
    for (int h = 1; h <= 8; ++h) {
      const Image img = random_gray(rng, w, h);
      const IntegralImage ii = integral(img);
      for (int y = 0; y <= h; ++y)
        for (int x = 0; x <= w; ++x)
          for (int rh = 0; y + rh <= h; ++rh)
            for (int rw = 0; x + rw <= w; ++rw)
              ASSERT_EQ(rect_sum(ii, {x, y, rw, rh}), naive_rect(img, {x, y, rw, rh}));
    }
}

TEST(RectSum, RandomRectsOn32) {
  std::mt19937_64 rng(8);
  const Image img = random_gray(rng, 32, 32);
  const IntegralImage ii = integral(img);
  for (int i = 0; i < 200; ++i) {
    const Rect r = random_rect(rng, 32, 32);
    EXPECT_EQ(rect_sum(ii, r), naive_rect(img, r));
  }
}

TEST(RectSum, ZeroAreaAndBounds) {
  const IntegralImage ii = integral(Image(5, 5, 1, 9));
  EXPECT_EQ(rect_sum(ii, {2, 2, 0, 3}), 0);
  EXPECT_EQ(rect_sum(ii, {5, 5, 0, 0}), 0);
  EXPECT_THROW(rect_sum(ii, {3, 3, 3, 1}), Error);
  EXPECT_THROW(rect_sum(ii, {-1, 0, 1, 1}), Error);
  try {
    rect_sum(ii, {0, 0, 6, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Bounds);
  }
}

TEST(RectSum, AdditiveOverAdjacentRects) {
  std::mt19937_64 rng(9);
  const IntegralImage ii = integral(random_gray(rng, 30, 30));
  for (int i = 0; i < 100; ++i) {
    const Rect r = random_rect(rng, 30, 30);
    const int split = r.w ? int(rng() % std::uint64_t(r.w + 1)) : 0;
    const Rect a{r.x, r.y, split, r.h}, b{r.x + split, r.y, r.w - split, r.h};
    EXPECT_EQ(rect_sum(ii, r), rect_sum(ii, a) + rect_sum(ii, b));
  }
}

TEST(RectSum, NoOverflowAtFullScale) {
  // Both totals exceed 32 bits.
  const IntegralImage ii = integral(Image(4096, 1100, 1, 255));
  EXPECT_EQ(rect_sum(ii, {0, 0, 4096, 1100}), std::int64_t(4096) * 1100 * 255);
  EXPECT_EQ(ii.sq_at(4096, 1100), std::int64_t(4096) * 1100 * 255 * 255);
}

TEST(Sobel, ConstantIsZeroInside) {
  const Image img(10, 10, 1, 77);
  for (bool dx : {true, false}) {
    const GradientImage g = sobel(img, {dx ? 1 : 0, dx ? 0 : 1, 3});
    for (int y = 1; y < 9; ++y)
      for (int x = 1; x < 9; ++x) EXPECT_EQ(g.at(x, y), 0);
  }
}

TEST(Sobel, UnitRampGivesEight) {
  Image img(12, 9, 1);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 12; ++x) img.at(x, y) = std::uint8_t(x);
  const GradientImage gx = sobel(img, {1, 0, 3});
  const GradientImage gy = sobel(img, {0, 1, 3});
  for (int y = 1; y < 8; ++y)
    for (int x = 1; x < 11; ++x) {
      EXPECT_EQ(gx.at(x, y), 8);
      EXPECT_EQ(gy.at(x, y), 0);
    }
}

TEST(Sobel, MatchesDirectConvolutionEverywhere) {
  std::mt19937_64 rng(10);
  const Image img = random_gray(rng, 16, 16);
  const GradientImage gx = sobel(img, {1, 0, 3}), gy = sobel(img, {0, 1, 3});
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      EXPECT_EQ(gx.at(x, y), direct_sobel(img, x, y, true));
      EXPECT_EQ(gy.at(x, y), direct_sobel(img, x, y, false));
    }
}

TEST(Sobel, LinearInside) {
  std::mt19937_64 rng(11);
  Image a(14, 11, 1), b(14, 11, 1), mix(14, 11, 1);
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    a.data()[i] = std::uint8_t(rng() % 60);
    b.data()[i] = std::uint8_t(rng() % 60);
    mix.data()[i] = std::uint8_t(2 * a.data()[i] + 1 * b.data()[i]);
  }
  const auto ga = sobel(a, {1, 0, 3}), gb = sobel(b, {1, 0, 3}), gm = sobel(mix, {1, 0, 3});
  for (int y = 1; y < 10; ++y)
    for (int x = 1; x < 13; ++x) EXPECT_EQ(gm.at(x, y), 2 * ga.at(x, y) + gb.at(x, y));
}

TEST(Sobel, RejectsBadParamsAndTinyImages) {
  const Image img(5, 5, 1);
  EXPECT_THROW(sobel(img, {1, 1, 3}), Error);
  EXPECT_THROW(sobel(img, {0, 0, 3}), Error);
  EXPECT_THROW(sobel(img, {1, 0, 5}), Error);
  EXPECT_THROW(sobel(Image(2, 5, 1), {1, 0, 3}), Error);
  EXPECT_THROW(sobel(Image(5, 5, 3), {1, 0, 3}), Error);
}

TEST(Netpbm, RoundTripIsBitExact) {
  std::mt19937_64 rng(12);
  for (int channels : {1, 3}) {
    Image img(7, 5, channels);
    for (auto& v : img.data()) v = std::uint8_t(rng() & 0xFF);
    EXPECT_EQ(decode_pnm(encode_pnm(img)), img);
  }
}

TEST(Netpbm, AcceptsCommentsAndRejectsJunk) {
  const std::string pgm = std::string("P5\n# comment\n2 1\n255\n") + char(3) + char(200);
  const Image img = decode_pnm(pgm);
  EXPECT_EQ(img.width(), 2);
  EXPECT_EQ(img.at(1, 0), 200);
  EXPECT_THROW(decode_pnm("P2\n1 1\n255\n0"), Error);
  EXPECT_THROW(decode_pnm("P5\n2 2\n65535\n"), Error);
  EXPECT_THROW(decode_pnm("P5\n2 2\n255\nab"), Error);
  EXPECT_THROW(load_pnm("/nonexistent/x.pgm"), Error);
}

TEST(Resize, IdentityAndConstant) {
  std::mt19937_64 rng(13);
  const Image img = random_gray(rng, 9, 7);
  EXPECT_EQ(resize_bilinear(img, 9, 7), img);
  const Image c = resize_bilinear(Image(10, 10, 1, 42), 24, 24);
  ASSERT_EQ(c.width(), 24);
  for (auto v : c.data()) EXPECT_EQ(v, 42);
}
