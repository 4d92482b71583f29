#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "msibm/pyramid.hpp"
#include "support.hpp"

using namespace msibm;

namespace {

// Enumerates K upward until either constraint fails.
int enumerate_levels(int w, int h, int d_max, int block) {
  int k = 0;
  for (;;) {
    const int next = k + 1;
    const double scaled = std::min(w, h) / static_cast<double>(1L << next);
    const int d = static_cast<int>(d_max / static_cast<double>(1L << next));
    if (scaled < 4.0 * block || d < 2) return k;
    k = next;
  }
}

int odd_floor_clamped(int base, int k) {
  int b = static_cast<int>(base / static_cast<double>(1 << k));
  if (b % 2 == 0) b -= 1;
  return b < 3 ? 3 : b;
}

}  // namespace

TEST(Downsample, ConstantStaysConstant) {
  for (auto [w, h] : {std::pair{2, 2}, {5, 3}, {17, 32}, {64, 63}}) {
    const GrayImage img(w, h, 0.37);
    const GrayImage out = gaussian_downsample(img);
    EXPECT_EQ(out.width(), (w + 1) / 2);
    EXPECT_EQ(out.height(), (h + 1) / 2);
    for (double v : out.data()) EXPECT_NEAR(v, 0.37, 1e-15);
  }
}

TEST(Downsample, Shape) {
  const GrayImage out = gaussian_downsample(GrayImage(4, 4, 0.0));
  EXPECT_EQ(out.width(), 2);
  EXPECT_EQ(out.height(), 2);
  EXPECT_THROW(gaussian_downsample(GrayImage(1, 4, 0.0)), std::invalid_argument);
}

TEST(Downsample, RampMatchesDenseOracle) {
  GrayImage ramp(8, 8);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) ramp(r, c) = (3 * r + 5 * c) / 64.0;
  const GrayImage fast = gaussian_downsample(ramp);
  const GrayImage slow = fixtures::oracle_downsample(ramp);
  for (std::size_t k = 0; k < fast.size(); ++k) {
    EXPECT_NEAR(fast.data()[k], slow.data()[k], 1e-14);
  }
}

TEST(Downsample, RandomMatchesDenseOracle) {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    const int w = 2 + trial * 3 % 29;
    const int h = 2 + trial * 7 % 23;
    const GrayImage img = fixtures::random_image(w, h, rng);
    const GrayImage fast = gaussian_downsample(img);
    const GrayImage slow = fixtures::oracle_downsample(img);
    for (std::size_t k = 0; k < fast.size(); ++k) {
      ASSERT_NEAR(fast.data()[k], slow.data()[k], 1e-14);
    }
  }
}

TEST(Schedule, DisparityAndBlock) {
  MatchConfig cfg;
  cfg.d_max = 64;
  cfg.levels = 2;
  cfg.base_block = 11;
  const GrayImage img(128, 128, 0.5);
  const StereoPyramid p = build_pyramid(img, img, cfg);
  ASSERT_EQ(p.coarsest(), 2);
  EXPECT_EQ(p[0].d_max, 64);
  EXPECT_EQ(p[1].d_max, 32);
  EXPECT_EQ(p[2].d_max, 16);
  EXPECT_EQ(p[0].block, 11);
  EXPECT_EQ(p[1].block, 5);
  EXPECT_EQ(p[2].block, 3);
  EXPECT_EQ(p[1].width(), 64);
  EXPECT_EQ(p[2].height(), 32);
}

TEST(Schedule, BlockOracle) {
  for (int base = 3; base <= 63; base += 2)
    for (int k = 0; k < 8; ++k) EXPECT_EQ(level_block(base, k), odd_floor_clamped(base, k));
}

TEST(Schedule, SingleLevel) {
  MatchConfig cfg;
  cfg.d_max = 40;
  cfg.levels = 0;
  cfg.base_block = 7;
  std::mt19937 rng(1);
  const GrayImage img = fixtures::random_image(20, 10, rng);
  const StereoPyramid p = build_pyramid(img, img, cfg);
  ASSERT_EQ(p.coarsest(), 0);
  EXPECT_EQ(p[0].d_max, 40);
  EXPECT_EQ(p[0].block, 7);
  EXPECT_EQ(p[0].left, img);
}

TEST(Schedule, LevelsMatchDownsampling) {
  MatchConfig cfg;
  cfg.d_max = 32;
  cfg.levels = 2;
  std::mt19937 rng(4);
  const GrayImage l = fixtures::random_image(100, 90, rng);
  const GrayImage r = fixtures::random_image(100, 90, rng);
  const StereoPyramid p = build_pyramid(l, r, cfg);
  EXPECT_EQ(p[1].left, gaussian_downsample(l));
  EXPECT_EQ(p[2].right, gaussian_downsample(gaussian_downsample(r)));
}

TEST(Schedule, RejectsBadInput) {
  MatchConfig cfg;
  cfg.d_max = 64;
  cfg.levels = 6;
  const GrayImage img(64, 64, 0.5);
  EXPECT_THROW(build_pyramid(img, img, cfg), ConfigError);
  cfg.levels = 1;
  EXPECT_THROW(build_pyramid(img, GrayImage(64, 63, 0.5), cfg), std::invalid_argument);
  cfg.d_max = 3;
  EXPECT_THROW(build_pyramid(img, img, cfg), ConfigError);
}

TEST(AutoLevels, Examples) {
  EXPECT_EQ(auto_levels(2960, 2016, 256, 11), 5);
  EXPECT_EQ(enumerate_levels(2960, 2016, 256, 11), 5);
  EXPECT_EQ(auto_levels(32, 32, 8, 11), 0);
}

TEST(AutoLevels, MaximalProperty) {
  std::mt19937 rng(9);
  std::uniform_int_distribution<int> dim(8, 4000);
  std::uniform_int_distribution<int> disp(1, 512);
  std::uniform_int_distribution<int> half(1, 15);
  for (int trial = 0; trial < 2000; ++trial) {
    const int w = dim(rng), h = dim(rng), d = disp(rng), b = 2 * half(rng) + 1;
    const int k = auto_levels(w, h, d, b);
    EXPECT_EQ(k, enumerate_levels(w, h, d, b));
    if (k > 0) {
      EXPECT_GE(std::min(w, h) / static_cast<double>(1 << k), 4.0 * b);
      EXPECT_GE(d >> k, 2);
    }
    const bool next_ok =
        std::min(w, h) / static_cast<double>(1 << (k + 1)) >= 4.0 * b && (d >> (k + 1)) >= 2;
    EXPECT_FALSE(next_ok);
  }
}
