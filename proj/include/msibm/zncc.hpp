#pragma once

// Zero-mean normalized cross-correlation and the disparity search image.
//
// Two implementations live here:
//  * zncc()/patch_stats(): straightforward double-precision reference.
//  * LevelCost: the matching kernel. Intensities are quantized to fixed point
//    (kFixedScale steps per unit) and all patch sums are exact integers, so
//    the sliding-window sweep and the per-pixel path return bit-identical
//    costs. Patches are replicate-padded; a right center outside the image
//    yields kOutOfRangeCost.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msibm/config.hpp"
#include "msibm/image.hpp"
#include "msibm/parallel.hpp"
#include "msibm/pyramid.hpp"

namespace msibm {

inline constexpr double kDegenerateCost = -1.0;
inline constexpr double kOutOfRangeCost = -1.0;

struct PatchStats {
  double mean = 0.0;
  double sigma = 0.0;  // root mean squared deviation
};

inline PatchStats patch_stats(const GrayImage& img, Pixel center, int half) {
  if (!img.contains(center.row, center.col)) {
    throw std::out_of_range("patch center outside image");
  }
  const int side = 2 * half + 1;
  const double count = static_cast<double>(side) * side;
  double sum = 0.0;
  for (int a = -half; a <= half; ++a)
    for (int b = -half; b <= half; ++b) sum += img.clamped(center.row + a, center.col + b);
  const double mean = sum / count;
  double sq = 0.0;
  for (int a = -half; a <= half; ++a) {
    for (int b = -half; b <= half; ++b) {
      const double dev = img.clamped(center.row + a, center.col + b) - mean;
      sq += dev * dev;
    }
  }
  return {mean, std::sqrt(sq / count)};
}

/// ZNCC of the (2n+1)^2 replicate-padded patches around the two centers.
/// Returns kDegenerateCost if either patch has sigma < eps.
inline double zncc(const GrayImage& left, const GrayImage& right, Pixel center_l,
                   Pixel center_r, int half, double eps = 1e-6) {
  if (half < 0) throw std::invalid_argument("patch half-size must be >= 0");
  const PatchStats sl = patch_stats(left, center_l, half);
  const PatchStats sr = patch_stats(right, center_r, half);
  if (sl.sigma < eps || sr.sigma < eps) return kDegenerateCost;
  double dot = 0.0;
  for (int a = -half; a <= half; ++a) {
    for (int b = -half; b <= half; ++b) {
      dot += (left.clamped(center_l.row + a, center_l.col + b) - sl.mean) *
             (right.clamped(center_r.row + a, center_r.col + b) - sr.mean);
    }
  }
  const double side = 2.0 * half + 1.0;
  return std::clamp(dot / (side * side * sl.sigma * sr.sigma), -1.0, 1.0);
}

/// One pixel's DSI (or averaged DSI) over z in [0, d_max].
struct DsiSlice {
  Pixel pixel;
  std::vector<double> costs;
  std::vector<bool> evaluated;
  int neighbors = 1;  // number of DSIs summed into costs
};

/// Smallest z attaining the maximum.
inline int argmax_smallest(std::span<const double> values) {
  int best = 0;
  for (int z = 1; z < static_cast<int>(values.size()); ++z) {
    if (values[z] > values[best]) best = z;
  }
  return best;
}

class LevelCost {
 public:
  /// 255 * 2^16: 8-bit intensities (k/255) quantize exactly.
  static constexpr double kFixedScale = 255.0 * 65536.0;
  static constexpr int kBandRows = 16;

  LevelCost(const GrayImage& left, const GrayImage& right, int d_max, int block,
            SignConvention sign, double eps, EvalCounter* counter = nullptr)
      : width_(left.width()),
        height_(left.height()),
        d_max_(d_max),
        half_(block / 2),
        side_(block),
        count_(static_cast<std::int64_t>(block) * block),
        sign_(sign),
        counter_(counter) {
    if (!left.same_shape(right)) throw std::invalid_argument("left/right size mismatch");
    if (left.empty()) throw std::invalid_argument("empty level");
    if (block < 1 || block % 2 == 0 || block > kMaxBlock) {
      throw std::invalid_argument("block must be odd and in [1, " +
                                  std::to_string(kMaxBlock) + "]");
    }
    if (d_max < 0) throw std::invalid_argument("d_max must be >= 0");
    padded_width_ = width_ + 2 * half_;
    padded_height_ = height_ + 2 * half_;
    left_ = quantize_padded(left);
    right_ = quantize_padded(right);
    const long double floor_root =
        static_cast<long double>(eps) * static_cast<long double>(count_) * kFixedScale;
    left_stats_ = box_stats(left_, floor_root);
    right_stats_ = box_stats(right_, floor_root);
  }

  LevelCost(const PyramidLevel& level, const MatchConfig& cfg, EvalCounter* counter = nullptr)
      : LevelCost(level.left, level.right, level.d_max, level.block, cfg.sign, cfg.sigma_eps,
                  counter) {}

  int width() const { return width_; }
  int height() const { return height_; }
  int d_max() const { return d_max_; }
  int block() const { return side_; }
  int candidates() const { return d_max_ + 1; }
  SignConvention sign() const { return sign_; }

  /// E(z) for left pixel (row, col); counted.
  double entry(int row, int col, int z) const {
    if (row < 0 || row >= height_ || col < 0 || col >= width_) {
      throw std::out_of_range("DSI pixel outside level");
    }
    if (z < 0 || z > d_max_) {
      throw std::out_of_range("disparity " + std::to_string(z) + " outside [0, " +
                              std::to_string(d_max_) + "]");
    }
    record(1);
    return cost(row, col, z);
  }

  /// Uncounted, unchecked E(z).
  double cost(int row, int col, int z) const {
    const int rc = right_col(col, z);
    if (rc < 0 || rc >= width_) return kOutOfRangeCost;
    return normalize(row, col, rc, cross_direct(row, col, rc));
  }

  /// Uncounted full DSI of one pixel; out.size() == candidates().
  void full_dsi(int row, int col, std::span<double> out) const {
    for (int z = 0; z <= d_max_; ++z) out[z] = cost(row, col, z);
  }

  /// Calls sink(row, col, dsi) with the full DSI of every pixel in rows
  /// [row_begin, row_end) where need(row, col) holds. Uncounted. Dense bands
  /// use a sliding-sum sweep, sparse ones the per-pixel path; both produce
  /// identical values.
  template <typename Need, typename Sink>
  void for_each_dsi(int row_begin, int row_end, Need&& need, Sink&& sink) const {
    std::vector<double> dsi(candidates());
    for (int r0 = row_begin; r0 < row_end; r0 += kBandRows) {
      const int r1 = std::min(row_end, r0 + kBandRows);
      std::int64_t needed = 0;
      for (int r = r0; r < r1; ++r)
        for (int c = 0; c < width_; ++c) needed += need(r, c) ? 1 : 0;
      if (needed == 0) continue;
      const std::int64_t per_pixel_work = needed * count_;
      const std::int64_t sweep_work =
          static_cast<std::int64_t>(padded_width_) * (2 * (r1 - r0) + side_ + 2);
      if (per_pixel_work > sweep_work) {
        sweep_band(r0, r1, need, sink);
      } else {
        for (int r = r0; r < r1; ++r) {
          for (int c = 0; c < width_; ++c) {
            if (!need(r, c)) continue;
            full_dsi(r, c, dsi);
            sink(r, c, std::span<const double>(dsi));
          }
        }
      }
    }
  }

  /// Sliding-sum sweep over every row of [row_begin, row_end); uncounted.
  template <typename Need, typename Sink>
  void sweep_rows(int row_begin, int row_end, Need&& need, Sink&& sink) const {
    if (row_begin < row_end) sweep_band(row_begin, row_end, need, sink);
  }

  /// Right-image center column for disparity z.
  int right_col(int col, int z) const {
    return sign_ == SignConvention::Minus ? col - z : col + z;
  }

  bool degenerate_left(int row, int col) const {
    return left_stats_[index(row, col)].degenerate;
  }

  void record(std::uint64_t n) const {
    if (counter_ != nullptr) counter_->add(n);
  }
  EvalCounter* counter() const { return counter_; }

 private:
  struct FixedStats {
    std::int64_t sum = 0;
    long double root = 0;  // sqrt(N * sum_sq - sum^2)
    bool degenerate = true;
  };

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }
  std::size_t pindex(int prow, int pcol) const {
    return static_cast<std::size_t>(prow) * padded_width_ + pcol;
  }

  std::vector<std::int32_t> quantize_padded(const GrayImage& img) const {
    std::vector<std::int32_t> out(static_cast<std::size_t>(padded_width_) * padded_height_);
    for (int pr = 0; pr < padded_height_; ++pr) {
      for (int pc = 0; pc < padded_width_; ++pc) {
        double v = img.clamped(pr - half_, pc - half_);
        v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
        out[pindex(pr, pc)] = static_cast<std::int32_t>(std::llround(v * kFixedScale));
      }
    }
    return out;
  }

  std::vector<FixedStats> box_stats(const std::vector<std::int32_t>& padded,
                                    long double floor_root) const {
    // Column sums over the vertical window, then a horizontal window.
    std::vector<std::int64_t> col_sum(padded_width_), col_sq(padded_width_);
    std::vector<FixedStats> stats(static_cast<std::size_t>(width_) * height_);
    for (int row = 0; row < height_; ++row) {
      for (int pc = 0; pc < padded_width_; ++pc) {
        std::int64_t s = 0, q = 0;
        for (int a = 0; a < side_; ++a) {
          const std::int64_t v = padded[pindex(row + a, pc)];
          s += v;
          q += v * v;
        }
        col_sum[pc] = s;
        col_sq[pc] = q;
      }
      for (int col = 0; col < width_; ++col) {
        std::int64_t s = 0, q = 0;
        for (int b = 0; b < side_; ++b) {
          s += col_sum[col + b];
          q += col_sq[col + b];
        }
        const __int128 var = static_cast<__int128>(count_) * q - static_cast<__int128>(s) * s;
        FixedStats& st = stats[index(row, col)];
        st.sum = s;
        st.root = std::sqrt(static_cast<long double>(var));
        st.degenerate = st.root < floor_root;
      }
    }
    return stats;
  }

  std::int64_t cross_direct(int row, int col, int rc) const {
    std::int64_t acc = 0;
    for (int a = 0; a < side_; ++a) {
      const std::int32_t* l = left_.data() + pindex(row + a, col);
      const std::int32_t* r = right_.data() + pindex(row + a, rc);
      for (int b = 0; b < side_; ++b) acc += static_cast<std::int64_t>(l[b]) * r[b];
    }
    return acc;
  }

  double normalize(int row, int col, int rc, std::int64_t cross) const {
    const FixedStats& l = left_stats_[index(row, col)];
    const FixedStats& r = right_stats_[index(row, rc)];
    if (l.degenerate || r.degenerate) return kDegenerateCost;
    const __int128 num =
        static_cast<__int128>(count_) * cross - static_cast<__int128>(l.sum) * r.sum;
    const long double value = static_cast<long double>(num) / (l.root * r.root);
    return std::clamp(static_cast<double>(value), -1.0, 1.0);
  }

  template <typename Need, typename Sink>
  void sweep_band(int r0, int r1, Need& need, Sink& sink) const {
    const int nz = candidates();
    std::vector<std::int64_t> col_cross(static_cast<std::size_t>(nz) * padded_width_);
    std::vector<double> row_dsi(static_cast<std::size_t>(width_) * nz);
    auto shift_of = [&](int z) { return sign_ == SignConvention::Minus ? -z : z; };
    auto product = [&](int prow, int pc, int shift) -> std::int64_t {
      const int rc = pc + shift;
      if (rc < 0 || rc >= padded_width_) return 0;
      return static_cast<std::int64_t>(left_[pindex(prow, pc)]) * right_[pindex(prow, rc)];
    };

    for (int z = 0; z < nz; ++z) {
      std::int64_t* cs = col_cross.data() + static_cast<std::size_t>(z) * padded_width_;
      const int shift = shift_of(z);
      for (int pc = 0; pc < padded_width_; ++pc) {
        std::int64_t s = 0;
        for (int a = 0; a < side_; ++a) s += product(r0 + a, pc, shift);
        cs[pc] = s;
      }
    }

    for (int row = r0; row < r1; ++row) {
      if (row > r0) {
        for (int z = 0; z < nz; ++z) {
          std::int64_t* cs = col_cross.data() + static_cast<std::size_t>(z) * padded_width_;
          const int shift = shift_of(z);
          for (int pc = 0; pc < padded_width_; ++pc) {
            cs[pc] += product(row + side_ - 1, pc, shift) - product(row - 1, pc, shift);
          }
        }
      }
      bool any = false;
      for (int c = 0; c < width_ && !any; ++c) any = need(row, c);
      if (!any) continue;

      for (int z = 0; z < nz; ++z) {
        const std::int64_t* cs =
            col_cross.data() + static_cast<std::size_t>(z) * padded_width_;
        std::int64_t h = 0;
        for (int b = 0; b < side_; ++b) h += cs[b];
        for (int col = 0; col < width_; ++col) {
          const int rc = right_col(col, z);
          double v = kOutOfRangeCost;
          if (rc >= 0 && rc < width_) v = normalize(row, col, rc, h);
          row_dsi[static_cast<std::size_t>(col) * nz + z] = v;
          if (col + side_ < padded_width_) h += cs[col + side_] - cs[col];
        }
      }
      for (int col = 0; col < width_; ++col) {
        if (!need(row, col)) continue;
        sink(row, col,
             std::span<const double>(row_dsi.data() + static_cast<std::size_t>(col) * nz, nz));
      }
    }
  }

  int width_;
  int height_;
  int d_max_;
  int half_;
  int side_;
  std::int64_t count_;
  SignConvention sign_;
  EvalCounter* counter_;
  int padded_width_ = 0;
  int padded_height_ = 0;
  std::vector<std::int32_t> left_;
  std::vector<std::int32_t> right_;
  std::vector<FixedStats> left_stats_;
  std::vector<FixedStats> right_stats_;
};

/// E(z) for left pixel (i, j) against the right patch picked by the sign
/// convention; counted.
inline double dsi_entry(const LevelCost& cost, Pixel pixel, int z) {
  return cost.entry(pixel.row, pixel.col, z);
}

/// Full DSI of one pixel; counts d_max+1 evaluations.
inline DsiSlice dsi_slice(const LevelCost& cost, Pixel pixel) {
  if (pixel.row < 0 || pixel.row >= cost.height() || pixel.col < 0 ||
      pixel.col >= cost.width()) {
    throw std::out_of_range("DSI pixel outside level");
  }
  DsiSlice slice{pixel, std::vector<double>(cost.candidates()),
                 std::vector<bool>(cost.candidates(), true), 1};
  cost.full_dsi(pixel.row, pixel.col, slice.costs);
  cost.record(static_cast<std::uint64_t>(cost.candidates()));
  return slice;
}

/// Sum of the DSIs over the (2r+1)^2 neighborhood of `pixel`, clipped to the
/// level. Stores the sum, not the mean; argmax is the same either way.
inline DsiSlice averaged_dsi(const LevelCost& cost, Pixel pixel, int radius = 1) {
  if (pixel.row < 0 || pixel.row >= cost.height() || pixel.col < 0 ||
      pixel.col >= cost.width()) {
    throw std::out_of_range("DSI pixel outside level");
  }
  const int nz = cost.candidates();
  DsiSlice slice{pixel, std::vector<double>(nz, 0.0), std::vector<bool>(nz, true), 0};
  std::vector<double> dsi(nz);
  for (int m = pixel.row - radius; m <= pixel.row + radius; ++m) {
    for (int n = pixel.col - radius; n <= pixel.col + radius; ++n) {
      if (m < 0 || m >= cost.height() || n < 0 || n >= cost.width()) continue;
      cost.full_dsi(m, n, dsi);
      for (int z = 0; z < nz; ++z) slice.costs[z] += dsi[z];
      ++slice.neighbors;
    }
  }
  cost.record(static_cast<std::uint64_t>(slice.neighbors) * nz);
  return slice;
}

}  // namespace msibm
