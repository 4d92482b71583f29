#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "msibm/config.hpp"
#include "msibm/image.hpp"

namespace msibm {

struct PyramidLevel {
  GrayImage left;
  GrayImage right;
  int d_max = 1;
  int block = 3;

  int width() const { return left.width(); }
  int height() const { return left.height(); }
  int half_block() const { return block / 2; }
};

/// Level 0 is the original resolution, level K the coarsest.
struct StereoPyramid {
  std::vector<PyramidLevel> levels;

  int coarsest() const { return static_cast<int>(levels.size()) - 1; }
  const PyramidLevel& operator[](int k) const { return levels.at(k); }
};

/// floor(D_max / 2^k), never below 1.
inline int level_d_max(int d_max, int k) { return std::max(1, d_max >> std::min(k, 30)); }

/// base / 2^k rounded down to odd, never below 3.
inline int level_block(int base_block, int k) {
  int b = base_block >> std::min(k, 30);
  if (b % 2 == 0) --b;
  return std::max(3, b);
}

inline int half_size(int n) { return (n + 1) / 2; }

/// Binomial (1,4,6,4,1)/16 smoothing with replicate borders, then keeps even
/// rows and columns.
inline GrayImage gaussian_downsample(const GrayImage& img) {
  if (img.width() < 2 || img.height() < 2) {
    throw std::invalid_argument("gaussian_downsample needs at least 2x2 input, got " +
                                std::to_string(img.width()) + "x" +
                                std::to_string(img.height()));
  }
  static constexpr std::array<double, 5> kTaps = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16,
                                                  1.0 / 16};
  const int out_w = half_size(img.width());
  const int out_h = half_size(img.height());

  // Horizontal pass at the kept columns only.
  Raster<double> horiz(out_w, img.height());
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < out_w; ++c) {
      double acc = 0.0;
      for (int t = -2; t <= 2; ++t) acc += kTaps[t + 2] * img.clamped(r, 2 * c + t);
      horiz(r, c) = acc;
    }
  }
  GrayImage out(out_w, out_h);
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      double acc = 0.0;
      for (int t = -2; t <= 2; ++t) acc += kTaps[t + 2] * horiz.clamped(2 * r + t, c);
      out(r, c) = acc;
    }
  }
  return out;
}

/// Largest K with min(w,h)/2^K >= 4*block and floor(D_max/2^K) >= 2; at
/// least 0.
inline int auto_levels(int width, int height, int d_max, int base_block) {
  const double min_dim = std::min(width, height);
  int k = 0;
  while (k < 30) {
    const int next = k + 1;
    const bool big_enough = min_dim / static_cast<double>(1 << next) >= 4.0 * base_block;
    const bool disparities_left = (d_max >> next) >= 2;
    if (!big_enough || !disparities_left) break;
    k = next;
  }
  return k;
}

inline int resolve_levels(const MatchConfig& cfg, int width, int height) {
  return cfg.levels ? *cfg.levels : auto_levels(width, height, cfg.d_max, cfg.base_block);
}

inline StereoPyramid build_pyramid(const GrayImage& left, const GrayImage& right,
                                   const MatchConfig& cfg) {
  if (!left.same_shape(right)) {
    throw std::invalid_argument("left and right images differ in size");
  }
  if (left.empty()) throw std::invalid_argument("empty stereo pair");
  if (cfg.d_max < 1) throw ConfigError("d_max must be >= 1");
  const int levels = resolve_levels(cfg, left.width(), left.height());
  if (levels < 0) throw ConfigError("levels must be >= 0");

  if (levels > 0) {
    int w = left.width();
    int h = left.height();
    for (int k = 1; k <= levels; ++k) {
      if (w < 2 || h < 2) throw ConfigError("too many pyramid levels for image size");
      w = half_size(w);
      h = half_size(h);
    }
    const int block_k = level_block(cfg.base_block, levels);
    if (std::min(w, h) < 2 * block_k) {
      throw ConfigError("too many pyramid levels: coarsest level " + std::to_string(w) +
                        "x" + std::to_string(h) + " is smaller than twice its block " +
                        std::to_string(block_k));
    }
    if ((cfg.d_max >> levels) < 2) {
      throw ConfigError("too many pyramid levels: coarsest d_max would fall below 2");
    }
  }

  StereoPyramid pyramid;
  pyramid.levels.reserve(levels + 1);
  pyramid.levels.push_back({left, right, level_d_max(cfg.d_max, 0),
                            level_block(cfg.base_block, 0)});
  for (int k = 1; k <= levels; ++k) {
    const PyramidLevel& prev = pyramid.levels.back();
    PyramidLevel next{gaussian_downsample(prev.left), gaussian_downsample(prev.right),
                      level_d_max(cfg.d_max, k), level_block(cfg.base_block, k)};
    pyramid.levels.push_back(std::move(next));
  }
  return pyramid;
}

}  // namespace msibm
