#pragma once

// Standard block matching at full resolution. Written as a plain loop nest in
// double precision with its own patch statistics; it shares nothing with the
// LevelCost kernel and serves as the reference the hierarchy is checked
// against.

#include <cmath>
#include <cstdint>
#include <vector>

#include "msibm/config.hpp"
#include "msibm/image.hpp"

namespace msibm {

struct BaselineResult {
  DisparityMap disparity;
  CostMap cost;
  std::uint64_t evals = 0;
};

inline BaselineResult baseline_bm(const GrayImage& left, const GrayImage& right, int d_max,
                                  int block,
                                  SignConvention sign = SignConvention::Minus,
                                  double eps = 1e-6) {
  if (!left.same_shape(right)) throw std::invalid_argument("baseline_bm: size mismatch");
  if (d_max < 0) throw ConfigError("d_max must be >= 0");
  if (block < 1 || block % 2 == 0) throw ConfigError("block must be odd");
  const int w = left.width();
  const int h = left.height();
  const int n = block / 2;
  const double count = static_cast<double>(block) * block;

  auto px = [](const GrayImage& img, int r, int c) {
    if (r < 0) r = 0;
    if (r >= img.height()) r = img.height() - 1;
    if (c < 0) c = 0;
    if (c >= img.width()) c = img.width() - 1;
    return img(r, c);
  };
  auto mean_sigma = [&](const GrayImage& img, int r, int c, double& mean, double& sigma) {
    double s = 0.0;
    for (int a = -n; a <= n; ++a)
      for (int b = -n; b <= n; ++b) s += px(img, r + a, c + b);
    mean = s / count;
    double q = 0.0;
    for (int a = -n; a <= n; ++a)
      for (int b = -n; b <= n; ++b) {
        const double dev = px(img, r + a, c + b) - mean;
        q += dev * dev;
      }
    sigma = std::sqrt(q / count);
  };

  BaselineResult out{DisparityMap(w, h, 0.0f), CostMap(w, h, 0.0), 0};
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double lm = 0, ls = 0;
      mean_sigma(left, i, j, lm, ls);
      int best_z = 0;
      double best = 0.0;
      for (int z = 0; z <= d_max; ++z) {
        ++out.evals;
        const int rj = sign == SignConvention::Minus ? j - z : j + z;
        double e = -1.0;
        if (rj >= 0 && rj < w) {
          double rm = 0, rs = 0;
          mean_sigma(right, i, rj, rm, rs);
          if (ls >= eps && rs >= eps) {
            double dot = 0.0;
            for (int a = -n; a <= n; ++a)
              for (int b = -n; b <= n; ++b)
                dot += (px(left, i + a, j + b) - lm) * (px(right, i + a, rj + b) - rm);
            e = dot / (count * ls * rs);
            if (e > 1.0) e = 1.0;
            if (e < -1.0) e = -1.0;
          }
        }
        if (z == 0 || e > best) {
          best = e;
          best_z = z;
        }
      }
      out.disparity(i, j) = static_cast<float>(best_z);
      out.cost(i, j) = best;
    }
  }
  return out;
}

}  // namespace msibm
