#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "iwn/error.hpp"
#include "iwn/metrics.hpp"
#include "metric_oracles.hpp"
#include "support.hpp"

namespace iwn {
namespace {

using test::oracle_psnr;
using test::oracle_ssim;

Image noisy_copy(const Image& a, std::uint64_t seed, double amp) {
  Image b = a;
  const auto n = test::random_image(a.height(), a.width(), a.channels(), seed, -amp, amp);
  for (std::size_t i = 0; i < b.size(); ++i) b.pixels()[i] += n.pixels()[i];
  b.clip();
  return b;
}

TEST(Mse, IdenticalIsZero) {
  const auto a = test::random_image(8, 8, 3, 1);
  EXPECT_EQ(mse(a, a), 0.0);
}

TEST(Mse, OneGrayLevelEverywhereIsOne) {
  const Image a(16, 16, 3, 0.2);
  Image b = a;
  for (auto& v : b.pixels()) v += 1.0 / 255.0;
  EXPECT_NEAR(mse(a, b), 1.0, 1e-9);
  EXPECT_NEAR(psnr(a, b), 48.1308036, 1e-6);
}

TEST(Mse, BlackVersusWhite) {
  EXPECT_DOUBLE_EQ(mse(Image(4, 4, 3, 0.0), Image(4, 4, 3, 1.0)), 65025.0);
  EXPECT_DOUBLE_EQ(psnr(Image(4, 4, 3, 0.0), Image(4, 4, 3, 1.0)), 0.0);
}

TEST(Psnr, IdenticalIsInfinite) {
  const auto a = test::random_image(8, 8, 3, 1);
  EXPECT_EQ(psnr(a, a), std::numeric_limits<double>::infinity());
  EXPECT_EQ(measure(a, a).psnr_db, std::numeric_limits<double>::infinity());
}

TEST(Psnr, MatchesDirectSum) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = test::random_image(32, 40, 3, s);
    const auto b = noisy_copy(a, 50 + s, 0.2);
    EXPECT_NEAR(psnr(a, b), oracle_psnr(a, b), 1e-6);
  }
}

TEST(Metrics, ShapeMismatchThrows) {
  const Image a(8, 8, 3), b(8, 8, 1);
  for (auto fn : {+[](const Image& x, const Image& y) { return mse(x, y); },
                  +[](const Image& x, const Image& y) { return psnr(x, y); },
                  +[](const Image& x, const Image& y) { return ssim(x, y); }}) {
    try {
      fn(a, b);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
    }
  }
}

TEST(Ssim, IdenticalIsOne) {
  const auto a = test::random_image(64, 64, 3, 2);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-9);
  SsimOptions global;
  global.global = true;
  EXPECT_NEAR(ssim(a, a, global), 1.0, 1e-9);
}

TEST(Ssim, ConstantImagesMatchClosedForm) {
  const Image a(32, 32, 3, 0.2), b(32, 32, 3, 0.8);
  const double c1 = std::pow(0.01 * 255, 2), c2 = std::pow(0.03 * 255, 2);
  const double ma = 0.2 * 255, mb = 0.8 * 255;
  const double expected = (2 * ma * mb + c1) * c2 / ((ma * ma + mb * mb + c1) * c2);
  EXPECT_NEAR(ssim(a, b), expected, 1e-9);
  SsimOptions global;
  global.global = true;
  EXPECT_NEAR(ssim(a, b, global), expected, 1e-9);
}

TEST(Ssim, MatchesDirectSummationOracle) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = test::random_image(40, 48, 3, 100 + s);
    const auto b = noisy_copy(a, 200 + s, 0.1 + 0.05 * s);
    EXPECT_NEAR(ssim(a, b), oracle_ssim(a, b), 1e-4);
  }
}

TEST(Ssim, SmallImagesFallBackToGlobal) {
  const auto a = test::random_image(8, 8, 1, 3);
  const auto b = noisy_copy(a, 4, 0.2);
  SsimOptions global;
  global.global = true;
  EXPECT_DOUBLE_EQ(ssim(a, b), ssim(a, b, global));
  EXPECT_NEAR(ssim(a, b), oracle_ssim(a, b, 8, 1e9), 1e-9);
}

TEST(Ssim, StaysInRange) {
  const auto a = test::random_image(32, 32, 3, 5);
  const auto b = test::random_image(32, 32, 3, 6);
  const double s = ssim(a, b);
  EXPECT_GE(s, -1.0);
  EXPECT_LE(s, 1.0);
  EXPECT_LT(s, 0.2);
}

}  // namespace
}  // namespace iwn
