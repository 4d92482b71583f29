#pragma once

// Multi-scale hierarchical block matching.
//
// Per level the pipeline is: select (full search at the coarsest level,
// prior-guided +-1 window search elsewhere) -> averaged-DSI refinement of
// low-cost pixels -> selective median of low-cost pixels. Every stage writes
// a fresh map, so neighborhood reads never see partially updated data.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "msibm/config.hpp"
#include "msibm/image.hpp"
#include "msibm/parallel.hpp"
#include "msibm/pyramid.hpp"
#include "msibm/zncc.hpp"

namespace msibm {

struct LevelResult {
  DisparityMap disparity;
  CostMap cost;
};

struct SelectStats {
  std::uint64_t pixels = 0;
  std::uint64_t trusted = 0;
  std::uint64_t window_evals = 0;
  std::uint64_t full_search_evals = 0;
  int max_window_evals = 0;
};

struct RefineStats {
  std::uint64_t refined_pixels = 0;
  std::uint64_t support_pixels = 0;  // distinct pixels whose DSI was consumed
  std::uint64_t reused_pixels = 0;   // support DSIs taken from the full-search cache
  std::uint64_t evals = 0;
};

/// Exact counters for one pyramid level. Wall times are kept apart from the
/// counts so that traces compare bit-identically across runs.
struct LevelTrace {
  int level = 0;
  int width = 0;
  int height = 0;
  int d_max = 0;
  int block = 0;
  SelectStats select;
  RefineStats refine;
  std::uint64_t median_filtered = 0;
  std::uint64_t total_evals = 0;  // recorded by the level's counter

  double trusted_fraction() const {
    return select.pixels == 0 ? 0.0
                              : static_cast<double>(select.trusted) / select.pixels;
  }
  /// window + full search + refinement; equals total_evals.
  std::uint64_t accounted_evals() const {
    return select.window_evals + select.full_search_evals + refine.evals;
  }
  /// 3T + (d_max+1)(P-T) + R.
  std::uint64_t eval_bound() const {
    return 3 * select.trusted +
           static_cast<std::uint64_t>(d_max + 1) * (select.pixels - select.trusted) +
           refine.evals;
  }
};

struct LevelTiming {
  int level = 0;
  double select_ms = 0;
  double refine_ms = 0;
  double median_ms = 0;
};

struct PipelineTrace {
  std::vector<LevelTrace> levels;  // processing order: coarsest first
  std::vector<LevelTiming> timing;
  double pyramid_ms = 0;
  double total_ms = 0;

  std::uint64_t total_evals() const {
    std::uint64_t n = 0;
    for (const auto& l : levels) n += l.total_evals;
    return n;
  }
};

struct PipelineResult {
  DisparityMap disparity;
  CostMap cost;
  PipelineTrace trace;
};

/// Full DSIs already produced by a full search, kept so that refinement can
/// reuse them instead of evaluating them again. Slot -1 means not cached.
struct DsiCache {
  int candidates = 0;
  Raster<std::int32_t> slot;
  std::vector<double> pool;

  bool enabled() const { return !slot.empty(); }
  bool has(int r, int c) const { return enabled() && slot(r, c) >= 0; }
  const double* get(int r, int c) const {
    return pool.data() + static_cast<std::size_t>(slot(r, c)) * candidates;
  }
  double* get(int r, int c) {
    return pool.data() + static_cast<std::size_t>(slot(r, c)) * candidates;
  }

  /// Reserves a slot for every pixel where mask is set, in row-major order,
  /// unless that would exceed budget_bytes (then stays disabled).
  template <typename Mask>
  void allocate(int width, int height, int nz, std::size_t budget_bytes, Mask&& mask) {
    std::int64_t count = 0;
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c) count += mask(r, c) ? 1 : 0;
    if (count == 0 ||
        static_cast<std::size_t>(count) * nz * sizeof(double) > budget_bytes) {
      *this = DsiCache{};
      return;
    }
    candidates = nz;
    slot = Raster<std::int32_t>(width, height, -1);
    std::int32_t next = 0;
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c)
        if (mask(r, c)) slot(r, c) = next++;
    pool.assign(static_cast<std::size_t>(count) * nz, 0.0);
  }
};

namespace detail {

inline int band_count(int height) {
  return (height + LevelCost::kBandRows - 1) / LevelCost::kBandRows;
}

class Stopwatch {
 public:
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace detail

/// Full search over [0, d_max] for every pixel: d = smallest argmax, C = max.
inline LevelResult match_coarsest(const LevelCost& cost, int threads = 1,
                                  SelectStats* stats = nullptr, DsiCache* cache = nullptr,
                                  std::size_t cache_budget = 0) {
  const int w = cost.width();
  const int h = cost.height();
  LevelResult out{DisparityMap(w, h, 0.0f), CostMap(w, h, 0.0)};
  if (cache != nullptr) {
    cache->allocate(w, h, cost.candidates(), cache_budget, [](int, int) { return true; });
  }
  parallel_for(detail::band_count(h), threads, [&](int band) {
    const int r0 = band * LevelCost::kBandRows;
    const int r1 = std::min(h, r0 + LevelCost::kBandRows);
    cost.for_each_dsi(
        r0, r1, [](int, int) { return true; },
        [&](int r, int c, std::span<const double> dsi) {
          const int z = argmax_smallest(dsi);
          out.disparity(r, c) = static_cast<float>(z);
          out.cost(r, c) = dsi[z];
          if (cache != nullptr && cache->has(r, c)) {
            std::copy(dsi.begin(), dsi.end(), cache->get(r, c));
          }
        });
    cost.record(static_cast<std::uint64_t>(r1 - r0) * w * cost.candidates());
  });
  if (stats != nullptr) {
    const auto pixels = static_cast<std::uint64_t>(w) * h;
    *stats = SelectStats{pixels, 0, 0, pixels * cost.candidates(), 0};
  }
  return out;
}

/// Pixels with C > alpha pass through untouched. Others take the argmax of
/// the summed DSI over their clipped neighborhood, and the neighborhood mean
/// of that maximum as their new cost. DSIs found in `cache` are reused and
/// not counted again.
inline LevelResult refine_level(const LevelCost& cost, const LevelResult& in, double alpha,
                                int radius = 1, int threads = 1,
                                RefineStats* stats = nullptr,
                                const DsiCache* cache = nullptr) {
  const int w = cost.width();
  const int h = cost.height();
  if (in.disparity.width() != w || in.disparity.height() != h || !in.cost.same_shape(in.disparity)) {
    throw std::invalid_argument("refine_level: maps do not match the level");
  }
  const int nz = cost.candidates();
  LevelResult out = in;

  Raster<unsigned char> bad(w, h, 0);
  Raster<unsigned char> support(w, h, 0);
  std::uint64_t bad_count = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (in.cost(r, c) > alpha) continue;
      bad(r, c) = 1;
      ++bad_count;
      for (int m = std::max(0, r - radius); m <= std::min(h - 1, r + radius); ++m)
        for (int n = std::max(0, c - radius); n <= std::min(w - 1, c + radius); ++n)
          support(m, n) = 1;
    }
  }
  const bool use_cache = cache != nullptr && cache->enabled() &&
                         cache->candidates == nz && cache->slot.same_shape(support);
  auto cached = [&](int r, int c) { return use_cache && cache->has(r, c); };
  std::uint64_t support_count = 0;
  std::uint64_t fresh_count = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!support(r, c)) continue;
      ++support_count;
      if (!cached(r, c)) ++fresh_count;
    }
  }
  const std::uint64_t evals = fresh_count * static_cast<std::uint64_t>(nz);
  if (stats != nullptr) {
    *stats = RefineStats{bad_count, support_count, support_count - fresh_count, evals};
  }
  if (bad_count == 0) return out;

  parallel_for(detail::band_count(h), threads, [&](int band) {
    const int r0 = band * LevelCost::kBandRows;
    const int r1 = std::min(h, r0 + LevelCost::kBandRows);
    bool any = false;
    for (int r = r0; r < r1 && !any; ++r)
      for (int c = 0; c < w && !any; ++c) any = bad(r, c) != 0;
    if (!any) return;

    const int lo = std::max(0, r0 - radius);
    const int hi = std::min(h, r1 + radius);
    std::vector<double> buffer(static_cast<std::size_t>(hi - lo) * w * nz);
    auto slot = [&](int r, int c) {
      return buffer.data() + (static_cast<std::size_t>(r - lo) * w + c) * nz;
    };
    cost.for_each_dsi(
        lo, hi, [&](int r, int c) { return support(r, c) != 0 && !cached(r, c); },
        [&](int r, int c, std::span<const double> dsi) {
          std::copy(dsi.begin(), dsi.end(), slot(r, c));
        });
    for (int r = lo; r < hi; ++r)
      for (int c = 0; c < w; ++c)
        if (support(r, c) && cached(r, c)) std::copy_n(cache->get(r, c), nz, slot(r, c));

    std::vector<double> summed(nz);
    for (int r = r0; r < r1; ++r) {
      for (int c = 0; c < w; ++c) {
        if (!bad(r, c)) continue;
        std::fill(summed.begin(), summed.end(), 0.0);
        int neighbors = 0;
        for (int m = std::max(0, r - radius); m <= std::min(h - 1, r + radius); ++m) {
          for (int n = std::max(0, c - radius); n <= std::min(w - 1, c + radius); ++n) {
            const double* dsi = slot(m, n);
            for (int z = 0; z < nz; ++z) summed[z] += dsi[z];
            ++neighbors;
          }
        }
        const int z = argmax_smallest(summed);
        out.disparity(r, c) = static_cast<float>(z);
        out.cost(r, c) = std::clamp(summed[z] / neighbors, -1.0, 1.0);
      }
    }
  });
  cost.record(evals);
  return out;
}

/// Nearest-neighbour disparities (doubled into fine-level units) and bicubic
/// costs, clamped to [-1,1]. Fine pixel (i, j) sits at coarse (i/2, j/2).
inline LevelResult upsample_prior(const LevelResult& coarse, int width, int height) {
  if (width <= 0 || height <= 0 || half_size(width) != coarse.disparity.width() ||
      half_size(height) != coarse.disparity.height() ||
      !coarse.cost.same_shape(coarse.disparity)) {
    throw std::invalid_argument("upsample_prior: target is not the dyadic parent of the coarse map");
  }
  LevelResult out{DisparityMap(width, height), CostMap(width, height)};
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const float d = coarse.disparity(r / 2, c / 2);
      out.disparity(r, c) = is_invalid(d) ? kInvalidDisparity : 2.0f * d;
    }
  }

  // Keys cubic convolution, a = -0.5. Odd fine coordinates fall exactly half
  // way between coarse samples, even ones on a sample.
  auto weights = [](double t, double w[4]) {
    constexpr double a = -0.5;
    auto k = [&](double x) {
      x = std::abs(x);
      if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
      if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
      return 0.0;
    };
    w[0] = k(1.0 + t);
    w[1] = k(t);
    w[2] = k(1.0 - t);
    w[3] = k(2.0 - t);
  };
  double wr[4], wc[4];
  for (int r = 0; r < height; ++r) {
    const int r0 = r / 2;
    weights((r % 2) * 0.5, wr);
    for (int c = 0; c < width; ++c) {
      const int c0 = c / 2;
      weights((c % 2) * 0.5, wc);
      double acc = 0.0;
      for (int a = 0; a < 4; ++a) {
        double row_acc = 0.0;
        for (int b = 0; b < 4; ++b) row_acc += wc[b] * coarse.cost.clamped(r0 - 1 + a, c0 - 1 + b);
        acc += wr[a] * row_acc;
      }
      out.cost(r, c) = std::clamp(acc, -1.0, 1.0);
    }
  }
  return out;
}

/// Prior-guided selection. Pixels whose upsampled cost exceeds beta search
/// only {d_hat-1, d_hat, d_hat+1} within [0, d_max]; all others (and
/// pixels with an Invalid prior or an empty window) fall back to full search.
inline LevelResult select_with_prior(const LevelCost& cost, const LevelResult& prior,
                                     double beta, int threads = 1,
                                     SelectStats* stats = nullptr, DsiCache* cache = nullptr,
                                     std::size_t cache_budget = 0) {
  const int w = cost.width();
  const int h = cost.height();
  if (prior.disparity.width() != w || prior.disparity.height() != h ||
      !prior.cost.same_shape(prior.disparity)) {
    throw std::invalid_argument("select_with_prior: prior does not match the level");
  }
  const int d_max = cost.d_max();

  // Search window per pixel; lo > hi marks a full search.
  Raster<int> window_lo(w, h, 0), window_hi(w, h, -1);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const float d_hat = prior.disparity(r, c);
      if (is_invalid(d_hat) || !(prior.cost(r, c) > beta)) continue;
      const int center = static_cast<int>(std::lround(d_hat));
      window_lo(r, c) = std::max(0, center - 1);
      window_hi(r, c) = std::min(d_max, center + 1);
    }
  }
  auto untrusted = [&](int r, int c) { return window_lo(r, c) > window_hi(r, c); };
  if (cache != nullptr) cache->allocate(w, h, cost.candidates(), cache_budget, untrusted);

  const int bands = detail::band_count(h);
  LevelResult out{DisparityMap(w, h, 0.0f), CostMap(w, h, 0.0)};
  std::vector<SelectStats> per_band(bands);

  parallel_for(bands, threads, [&](int band) {
    const int r0 = band * LevelCost::kBandRows;
    const int r1 = std::min(h, r0 + LevelCost::kBandRows);
    SelectStats& st = per_band[band];
    for (int r = r0; r < r1; ++r) {
      for (int c = 0; c < w; ++c) {
        ++st.pixels;
        const int lo = window_lo(r, c);
        const int hi = window_hi(r, c);
        if (lo > hi) continue;
        int best = lo;
        double best_cost = cost.cost(r, c, lo);
        for (int z = lo + 1; z <= hi; ++z) {
          const double v = cost.cost(r, c, z);
          if (v > best_cost) {
            best = z;
            best_cost = v;
          }
        }
        out.disparity(r, c) = static_cast<float>(best);
        out.cost(r, c) = best_cost;
        ++st.trusted;
        st.window_evals += static_cast<std::uint64_t>(hi - lo + 1);
        st.max_window_evals = std::max(st.max_window_evals, hi - lo + 1);
      }
    }
    cost.for_each_dsi(r0, r1, untrusted, [&](int r, int c, std::span<const double> dsi) {
      const int z = argmax_smallest(dsi);
      out.disparity(r, c) = static_cast<float>(z);
      out.cost(r, c) = dsi[z];
      if (cache != nullptr && cache->has(r, c)) std::copy(dsi.begin(), dsi.end(), cache->get(r, c));
    });
    st.full_search_evals =
        (st.pixels - st.trusted) * static_cast<std::uint64_t>(cost.candidates());
    cost.record(st.window_evals + st.full_search_evals);
  });

  SelectStats total;
  for (const auto& st : per_band) {
    total.pixels += st.pixels;
    total.trusted += st.trusted;
    total.window_evals += st.window_evals;
    total.full_search_evals += st.full_search_evals;
    total.max_window_evals = std::max(total.max_window_evals, st.max_window_evals);
  }
  if (stats != nullptr) *stats = total;
  return out;
}

/// Low-cost pixels (C <= alpha) take the lower median of the valid
/// disparities in their clipped window whose cost exceeds alpha; unchanged if
/// no such neighbor exists.
inline DisparityMap selective_median(const DisparityMap& d, const CostMap& cost, double alpha,
                                     int radius = 2, int threads = 1,
                                     std::uint64_t* filtered = nullptr) {
  if (!d.same_shape(cost)) throw std::invalid_argument("selective_median: size mismatch");
  const int w = d.width();
  const int h = d.height();
  DisparityMap out = d;
  const int bands = detail::band_count(h);
  std::vector<std::uint64_t> changed(bands, 0);
  parallel_for(bands, threads, [&](int band) {
    const int r0 = band * LevelCost::kBandRows;
    const int r1 = std::min(h, r0 + LevelCost::kBandRows);
    std::vector<float> pool;
    for (int r = r0; r < r1; ++r) {
      for (int c = 0; c < w; ++c) {
        if (cost(r, c) > alpha) continue;
        pool.clear();
        for (int m = std::max(0, r - radius); m <= std::min(h - 1, r + radius); ++m) {
          for (int n = std::max(0, c - radius); n <= std::min(w - 1, c + radius); ++n) {
            if (cost(m, n) > alpha && !is_invalid(d(m, n))) pool.push_back(d(m, n));
          }
        }
        if (pool.empty()) continue;
        const auto mid = pool.begin() + (pool.size() - 1) / 2;
        std::nth_element(pool.begin(), mid, pool.end());
        out(r, c) = *mid;
        ++changed[band];
      }
    }
  });
  if (filtered != nullptr) {
    *filtered = 0;
    for (auto n : changed) *filtered += n;
  }
  return out;
}

namespace detail {

inline LevelResult refine_and_filter(const LevelCost& cost, LevelResult selected,
                                     const DsiCache& cache, const MatchConfig& cfg,
                                     LevelTrace& trace, LevelTiming& timing) {
  Stopwatch refine_watch;
  LevelResult refined = refine_level(cost, selected, cfg.alpha, cfg.refine_radius, cfg.threads,
                                     &trace.refine, &cache);
  timing.refine_ms = refine_watch.elapsed_ms();
  Stopwatch median_watch;
  refined.disparity = selective_median(refined.disparity, refined.cost, cfg.alpha,
                                       cfg.median_radius, cfg.threads, &trace.median_filtered);
  timing.median_ms = median_watch.elapsed_ms();
  return refined;
}

}  // namespace detail

/// Prior-guided selection, then refinement and selective median.
inline LevelResult match_level_with_prior(const LevelCost& cost, const LevelResult& prior,
                                          const MatchConfig& cfg, LevelTrace* trace = nullptr,
                                          LevelTiming* timing = nullptr) {
  LevelTrace local_trace;
  LevelTiming local_timing;
  LevelTrace& tr = trace != nullptr ? *trace : local_trace;
  LevelTiming& tm = timing != nullptr ? *timing : local_timing;
  detail::Stopwatch select_watch;
  DsiCache cache;
  LevelResult selected = select_with_prior(cost, prior, cfg.beta, cfg.threads, &tr.select,
                                           &cache, cfg.dsi_cache_bytes);
  tm.select_ms = select_watch.elapsed_ms();
  return detail::refine_and_filter(cost, std::move(selected), cache, cfg, tr, tm);
}

/// Coarsest level: full search, refinement, selective median.
inline LevelResult match_coarsest_level(const LevelCost& cost, const MatchConfig& cfg,
                                        LevelTrace* trace = nullptr,
                                        LevelTiming* timing = nullptr) {
  LevelTrace local_trace;
  LevelTiming local_timing;
  LevelTrace& tr = trace != nullptr ? *trace : local_trace;
  LevelTiming& tm = timing != nullptr ? *timing : local_timing;
  detail::Stopwatch select_watch;
  DsiCache cache;
  LevelResult selected =
      match_coarsest(cost, cfg.threads, &tr.select, &cache, cfg.dsi_cache_bytes);
  tm.select_ms = select_watch.elapsed_ms();
  return detail::refine_and_filter(cost, std::move(selected), cache, cfg, tr, tm);
}

inline PipelineResult run_pipeline(const GrayImage& left, const GrayImage& right,
                                   const MatchConfig& cfg) {
  cfg.validate();
  detail::Stopwatch total_watch;
  PipelineResult result;
  detail::Stopwatch pyramid_watch;
  const StereoPyramid pyramid = build_pyramid(left, right, cfg);
  result.trace.pyramid_ms = pyramid_watch.elapsed_ms();

  LevelResult current;
  for (int k = pyramid.coarsest(); k >= 0; --k) {
    const PyramidLevel& level = pyramid[k];
    EvalCounter counter;
    const LevelCost cost(level, cfg, &counter);
    LevelTrace trace;
    trace.level = k;
    trace.width = level.width();
    trace.height = level.height();
    trace.d_max = level.d_max;
    trace.block = level.block;
    LevelTiming timing;
    timing.level = k;
    if (k == pyramid.coarsest()) {
      current = match_coarsest_level(cost, cfg, &trace, &timing);
    } else {
      const LevelResult prior = upsample_prior(current, level.width(), level.height());
      current = match_level_with_prior(cost, prior, cfg, &trace, &timing);
    }
    trace.total_evals = counter.value();
    result.trace.levels.push_back(trace);
    result.trace.timing.push_back(timing);
  }
  result.disparity = std::move(current.disparity);
  result.cost = std::move(current.cost);
  result.trace.total_ms = total_watch.elapsed_ms();
  return result;
}

}  // namespace msibm
