#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "msibm/parallel.hpp"
#include "msibm/zncc.hpp"
#include "support.hpp"

using namespace msibm;

namespace {

GrayImage affine(const GrayImage& img, double gain, double offset) {
  GrayImage out = img;
  for (double& v : out.data()) v = gain * v + offset;
  return out;
}

}  // namespace

TEST(Zncc, SelfCorrelationIsOne) {
  std::mt19937 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const GrayImage img = fixtures::random_image(9, 9, rng);
    EXPECT_NEAR(zncc(img, img, {4, 4}, {4, 4}, 1 + trial % 4), 1.0, 1e-9);
  }
}

TEST(Zncc, AffineGainAndOffset) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> gain(0.1, 5.0);
  std::uniform_real_distribution<double> offset(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const GrayImage img = fixtures::random_image(7, 7, rng);
    const double a = gain(rng), b = offset(rng);
    EXPECT_NEAR(zncc(img, affine(img, a, b), {3, 3}, {3, 3}, 2), 1.0, 1e-6);
    EXPECT_NEAR(zncc(img, affine(img, -a, b), {3, 3}, {3, 3}, 2), -1.0, 1e-6);
  }
}

TEST(Zncc, SymmetricAndBounded) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const GrayImage a = fixtures::random_image(11, 11, rng);
    const GrayImage b = fixtures::random_image(11, 11, rng);
    const double ab = zncc(a, b, {5, 5}, {5, 4}, 3);
    const double ba = zncc(b, a, {5, 4}, {5, 5}, 3);
    EXPECT_NEAR(ab, ba, 1e-12);
    EXPECT_GE(ab, -1.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(Zncc, MatchesDirectOracle) {
  GrayImage a(3, 3), b(3, 3);
  const double pa[9] = {0.1, 0.5, 0.2, 0.9, 0.3, 0.3, 0.0, 0.7, 0.4};
  const double pb[9] = {0.2, 0.4, 0.4, 0.8, 0.1, 0.6, 0.3, 0.5, 0.9};
  for (int k = 0; k < 9; ++k) {
    a.data()[k] = pa[k];
    b.data()[k] = pb[k];
  }
  EXPECT_NEAR(zncc(a, b, {1, 1}, {1, 1}, 1),
              static_cast<double>(fixtures::oracle_zncc(a, 1, 1, b, 1, 1, 1)), 1e-12);

  std::mt19937 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const GrayImage l = fixtures::random_image(12, 10, rng);
    const GrayImage r = fixtures::random_image(12, 10, rng);
    std::uniform_int_distribution<int> row(0, 9), col(0, 11);
    const int i = row(rng), j = col(rng), k = col(rng);
    EXPECT_NEAR(zncc(l, r, {i, j}, {i, k}, 2),
                static_cast<double>(fixtures::oracle_zncc(l, i, j, r, i, k, 2)), 1e-12);
  }
}

TEST(Zncc, DegeneratePatch) {
  std::mt19937 rng(5);
  const GrayImage flat(7, 7, 0.4);
  const GrayImage tex = fixtures::random_image(7, 7, rng);
  EXPECT_EQ(zncc(flat, tex, {3, 3}, {3, 3}, 2), -1.0);
  EXPECT_EQ(zncc(tex, flat, {3, 3}, {3, 3}, 2), -1.0);
  EXPECT_EQ(zncc(flat, flat, {3, 3}, {3, 3}, 2), -1.0);
  GrayImage tiny = flat;
  tiny(3, 3) += 1e-7;  // sigma far below 1e-6
  EXPECT_EQ(zncc(tiny, tex, {3, 3}, {3, 3}, 2), -1.0);
}

TEST(LevelCostKernel, MatchesOracleOnRandomPairs) {
  std::mt19937 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const int w = 10 + trial % 9, h = 8 + trial % 7;
    const int block = 3 + 2 * (trial % 4);
    const GrayImage l = fixtures::random_image(w, h, rng);
    const GrayImage r = fixtures::random_image(w, h, rng);
    for (SignConvention sign : {SignConvention::Minus, SignConvention::Plus}) {
      const LevelCost cost(l, r, 6, block, sign, 1e-6);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          for (int z = 0; z <= 6; ++z) {
            const int rc = sign == SignConvention::Minus ? j - z : j + z;
            const double expect =
                rc < 0 || rc >= w
                    ? -1.0
                    : static_cast<double>(fixtures::oracle_zncc(l, i, j, r, i, rc, block / 2));
            ASSERT_NEAR(cost.cost(i, j, z), expect, 1e-12);
            if (rc >= 0 && rc < w) {
              ASSERT_NEAR(cost.cost(i, j, z), zncc(l, r, {i, j}, {i, rc}, block / 2), 1e-7);
            }
          }
    }
  }
}

TEST(LevelCostKernel, SweepBitIdenticalToPerPixel) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const int w = 20 + 3 * trial, h = 17 + 5 * trial;
    const GrayImage l = fixtures::random_image(w, h, rng);
    const GrayImage r = fixtures::random_image(w, h, rng);
    const int d_max = 4 + trial;
    const LevelCost cost(l, r, d_max, 3 + 2 * (trial % 5), SignConvention::Minus,
                         1e-6);
    std::vector<double> direct(cost.candidates());
    std::size_t visited = 0;
    cost.sweep_rows(
        0, h, [](int, int) { return true; },
        [&](int i, int j, std::span<const double> dsi) {
          cost.full_dsi(i, j, direct);
          for (int z = 0; z <= d_max; ++z) ASSERT_EQ(dsi[z], direct[z]);
          ++visited;
        });
    EXPECT_EQ(visited, static_cast<std::size_t>(w) * h);
  }
}

TEST(LevelCostKernel, ForEachDsiVisitsOnlyNeeded) {
  std::mt19937 rng(8);
  const GrayImage l = fixtures::random_image(40, 37, rng);
  const GrayImage r = fixtures::random_image(40, 37, rng);
  const LevelCost cost(l, r, 8, 5, SignConvention::Minus, 1e-6);
  for (int mod : {1, 3, 50}) {
    auto need = [&](int i, int j) { return (i * 40 + j) % mod == 0; };
    std::size_t visited = 0, expected = 0;
    for (int i = 0; i < 37; ++i)
      for (int j = 0; j < 40; ++j) expected += need(i, j) ? 1 : 0;
    std::vector<double> direct(cost.candidates());
    cost.for_each_dsi(0, 37, need, [&](int i, int j, std::span<const double> dsi) {
      ASSERT_TRUE(need(i, j));
      cost.full_dsi(i, j, direct);
      for (int z = 0; z <= 8; ++z) ASSERT_EQ(dsi[z], direct[z]);
      ++visited;
    });
    EXPECT_EQ(visited, expected);
  }
}

TEST(DsiEntry, IdenticalPairZeroDisparity) {
  const GrayImage img = fixtures::textured_noise(32, 32, 1);
  const LevelCost cost(img, img, 4, 5, SignConvention::Minus, 1e-6);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      if (!cost.degenerate_left(i, j)) {
        EXPECT_EQ(dsi_entry(cost, {i, j}, 0), 1.0);
      }
}

TEST(DsiEntry, ConstantShiftPeaksAtTruth) {
  const auto pair = fixtures::constant_shift_pair(48, 32, 5, 2);
  const LevelCost cost(pair.left, pair.right, 8, 5, SignConvention::Minus, 1e-6);
  // Interior: patches stay clear of the replicated borders in both images.
  for (int i = 2; i < 30; ++i)
    for (int j = 5 + 2; j < 48 - 2; ++j) EXPECT_EQ(dsi_entry(cost, {i, j}, 5), 1.0);
}

TEST(DsiEntry, OutOfRangeAndChecks) {
  std::mt19937 rng(9);
  const GrayImage img = fixtures::random_image(10, 6, rng);
  EvalCounter counter;
  const LevelCost cost(img, img, 6, 3, SignConvention::Minus, 1e-6, &counter);
  EXPECT_EQ(dsi_entry(cost, {2, 3}, 4), -1.0);
  EXPECT_EQ(counter.value(), 1u);
  EXPECT_THROW(dsi_entry(cost, {2, 3}, 7), std::out_of_range);
  EXPECT_THROW(dsi_entry(cost, {6, 3}, 0), std::out_of_range);

  const LevelCost plus(img, img, 6, 3, SignConvention::Plus, 1e-6);
  EXPECT_EQ(plus.cost(2, 7, 3), -1.0);
  EXPECT_NE(plus.cost(2, 3, 3), -1.0);
}

TEST(DsiSliceOps, SliceCounts) {
  std::mt19937 rng(10);
  const GrayImage l = fixtures::random_image(12, 12, rng);
  const GrayImage r = fixtures::random_image(12, 12, rng);
  EvalCounter counter;
  const LevelCost cost(l, r, 5, 3, SignConvention::Minus, 1e-6, &counter);
  const DsiSlice s = dsi_slice(cost, {4, 7});
  EXPECT_EQ(counter.value(), 6u);
  for (int z = 0; z <= 5; ++z) EXPECT_EQ(s.costs[z], cost.cost(4, 7, z));
}

TEST(DsiSliceOps, AveragedMatchesNaiveSum) {
  std::mt19937 rng(11);
  const GrayImage l = fixtures::random_image(14, 11, rng);
  const GrayImage r = fixtures::random_image(14, 11, rng);
  EvalCounter counter;
  const LevelCost cost(l, r, 4, 3, SignConvention::Minus, 1e-6, &counter);
  for (Pixel p : {Pixel{5, 6}, Pixel{0, 0}, Pixel{10, 13}, Pixel{0, 7}}) {
    counter.reset();
    const DsiSlice s = averaged_dsi(cost, p, 1);
    int members = 0;
    for (int m = p.row - 1; m <= p.row + 1; ++m)
      for (int n = p.col - 1; n <= p.col + 1; ++n)
        if (m >= 0 && m < 11 && n >= 0 && n < 14) ++members;
    EXPECT_EQ(s.neighbors, members);
    EXPECT_EQ(counter.value(), static_cast<std::uint64_t>(members) * 5);
    for (int z = 0; z <= 4; ++z) {
      long double oracle = 0;
      for (int m = p.row - 1; m <= p.row + 1; ++m)
        for (int n = p.col - 1; n <= p.col + 1; ++n) {
          if (m < 0 || m >= 11 || n < 0 || n >= 14) continue;
          oracle += n - z < 0 ? -1.0L : fixtures::oracle_zncc(l, m, n, r, m, n - z, 1);
        }
      EXPECT_NEAR(s.costs[z], static_cast<double>(oracle), 1e-12);
    }
  }
}

TEST(DsiSliceOps, ArgmaxInvariantUnderPositiveScale) {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> exponent(-20, 20);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(9);
    for (double& x : v) x = u(rng);
    if (trial % 3 == 0) v[7] = v[2];
    const int best = argmax_smallest(v);
    const double s = std::ldexp(1.0, exponent(rng));
    for (double& x : v) x *= s;
    EXPECT_EQ(argmax_smallest(v), best);
  }
  const std::vector<double> ties = {0.2, 0.9, 0.9, 0.1};
  EXPECT_EQ(argmax_smallest(ties), 1);
}
