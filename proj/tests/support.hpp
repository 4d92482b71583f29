#pragma once

// Test-only generators and brute-force oracles. Nothing here calls into the
// optimized kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "msibm/image.hpp"

namespace msibm::fixtures {

/// Uniform 8-bit intensities k/255.
inline GrayImage random_image(int w, int h, std::mt19937& rng) {
  std::uniform_int_distribution<int> dist(0, 255);
  GrayImage img(w, h);
  for (double& v : img.data()) v = dist(rng) / 255.0;
  return img;
}

/// Multi-octave value noise, 8-bit quantized. Coarse octaves keep texture
/// alive after several 2x reductions.
inline GrayImage textured_noise(int w, int h, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Raster<double> acc(w, h, 0.0);
  double total_weight = 0.0;
  for (int cell : {16, 8, 4, 2, 1}) {
    const int gw = w / cell + 2;
    const int gh = h / cell + 2;
    std::vector<double> grid(static_cast<std::size_t>(gw) * gh);
    for (double& g : grid) g = unit(rng);
    const double weight = static_cast<double>(cell);
    total_weight += weight;
    for (int r = 0; r < h; ++r) {
      const double y = static_cast<double>(r) / cell;
      const int y0 = static_cast<int>(y);
      const double ty = y - y0;
      for (int c = 0; c < w; ++c) {
        const double x = static_cast<double>(c) / cell;
        const int x0 = static_cast<int>(x);
        const double tx = x - x0;
        auto g = [&](int gy, int gx) { return grid[static_cast<std::size_t>(gy) * gw + gx]; };
        const double v = (1 - ty) * ((1 - tx) * g(y0, x0) + tx * g(y0, x0 + 1)) +
                         ty * ((1 - tx) * g(y0 + 1, x0) + tx * g(y0 + 1, x0 + 1));
        acc(r, c) += weight * v;
      }
    }
  }
  GrayImage img(w, h);
  for (std::size_t k = 0; k < img.size(); ++k) {
    const double v = std::clamp(acc.data()[k] / total_weight, 0.0, 1.0);
    img.data()[k] = std::round(v * 255.0) / 255.0;
  }
  return img;
}

struct StereoPair {
  GrayImage left;
  GrayImage right;
  int disparity = 0;
};

/// Rectified pair with constant disparity d: right(i, j - d) == left(i, j).
inline StereoPair constant_shift_pair(int w, int h, int d, std::uint32_t seed) {
  const GrayImage base = textured_noise(w + d, h, seed);
  StereoPair pair{GrayImage(w, h), GrayImage(w, h), d};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      pair.left(r, c) = base(r, c);
      pair.right(r, c) = base(r, c + d);
    }
  }
  return pair;
}

inline double clamped_px(const GrayImage& img, int r, int c) {
  r = std::clamp(r, 0, img.height() - 1);
  c = std::clamp(c, 0, img.width() - 1);
  return img(r, c);
}

/// Direct-summation ZNCC in extended precision; -1 for degenerate patches.
inline long double oracle_zncc(const GrayImage& a, int ar, int ac, const GrayImage& b, int br,
                               int bc, int half, long double eps = 1e-6L) {
  const int side = 2 * half + 1;
  const long double n = static_cast<long double>(side) * side;
  long double ma = 0, mb = 0;
  for (int y = -half; y <= half; ++y)
    for (int x = -half; x <= half; ++x) {
      ma += clamped_px(a, ar + y, ac + x);
      mb += clamped_px(b, br + y, bc + x);
    }
  ma /= n;
  mb /= n;
  long double saa = 0, sbb = 0, sab = 0;
  for (int y = -half; y <= half; ++y)
    for (int x = -half; x <= half; ++x) {
      const long double da = clamped_px(a, ar + y, ac + x) - ma;
      const long double db = clamped_px(b, br + y, bc + x) - mb;
      saa += da * da;
      sbb += db * db;
      sab += da * db;
    }
  const long double sa = std::sqrt(saa / n);
  const long double sb = std::sqrt(sbb / n);
  if (sa < eps || sb < eps) return -1.0L;
  return std::clamp(sab / (n * sa * sb), -1.0L, 1.0L);
}

struct OracleMatch {
  Raster<int> disparity;
  Raster<long double> cost;
};

/// Quadruple loop: pixels x candidates, each with a direct patch ZNCC.
/// Right center at j - z; off-image centers cost -1; ties go to smaller z.
inline OracleMatch oracle_full_search(const GrayImage& left, const GrayImage& right, int d_max,
                                      int block) {
  const int half = block / 2;
  OracleMatch out{Raster<int>(left.width(), left.height(), 0),
                  Raster<long double>(left.width(), left.height(), 0)};
  for (int i = 0; i < left.height(); ++i) {
    for (int j = 0; j < left.width(); ++j) {
      long double best = -2;
      int best_z = 0;
      for (int z = 0; z <= d_max; ++z) {
        const long double e =
            j - z < 0 ? -1.0L : oracle_zncc(left, i, j, right, i, j - z, half);
        if (e > best) {
          best = e;
          best_z = z;
        }
      }
      out.disparity(i, j) = best_z;
      out.cost(i, j) = best;
    }
  }
  return out;
}

/// Selective median by collect, filter, sort.
inline DisparityMap oracle_selective_median(const DisparityMap& d, const Raster<double>& cost,
                                            double alpha, int radius) {
  DisparityMap out = d;
  for (int r = 0; r < d.height(); ++r) {
    for (int c = 0; c < d.width(); ++c) {
      if (cost(r, c) > alpha) continue;
      std::vector<float> good;
      for (int m = r - radius; m <= r + radius; ++m)
        for (int n = c - radius; n <= c + radius; ++n)
          if (d.contains(m, n) && cost(m, n) > alpha && !is_invalid(d(m, n)))
            good.push_back(d(m, n));
      if (good.empty()) continue;
      std::sort(good.begin(), good.end());
      out(r, c) = good[(good.size() - 1) / 2];
    }
  }
  return out;
}

/// Separable-free dense binomial 5x5 convolution + even decimation.
inline GrayImage oracle_downsample(const GrayImage& img) {
  const double k[5] = {1, 4, 6, 4, 1};
  GrayImage out((img.width() + 1) / 2, (img.height() + 1) / 2);
  for (int r = 0; r < out.height(); ++r) {
    for (int c = 0; c < out.width(); ++c) {
      long double acc = 0;
      for (int y = -2; y <= 2; ++y)
        for (int x = -2; x <= 2; ++x)
          acc += k[y + 2] * k[x + 2] * clamped_px(img, 2 * r + y, 2 * c + x);
      out(r, c) = static_cast<double>(acc / 256.0L);
    }
  }
  return out;
}

/// Fraction of interior pixels whose disparity is within tol of truth.
inline double fraction_within(const DisparityMap& d, int truth, int margin, int left_margin,
                              double tol = 1.0) {
  std::size_t good = 0, total = 0;
  for (int r = margin; r < d.height() - margin; ++r) {
    for (int c = left_margin; c < d.width() - margin; ++c) {
      ++total;
      if (!is_invalid(d(r, c)) && std::abs(d(r, c) - truth) <= tol) ++good;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(good) / total;
}

}  // namespace msibm::fixtures
