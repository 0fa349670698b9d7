#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "grid.hpp"
#include "nnsearch.hpp"
#include "pyramid.hpp"

namespace solidtex {

/// Which exemplar pixels feed a voxel in the optimize step. Center uses only
/// the centers of the voxel's own three matches. Overlap uses, per axis, every
/// matched patch whose window covers the voxel, which is the exact
/// least-squares minimizer of the match energy when r = 2.
enum class UpdateFootprint { Center, Overlap };

struct SynthesisParams {
  int pyramid_levels = 3;
  std::vector<int> window_per_level{6, 8, 8};         ///< finest to coarsest
  std::vector<int> iterations_per_level{20, 20, 30};  ///< finest to coarsest
  double weight_exponent = 0.8;                       ///< robust weight exponent r
  double histogram_weight = 1.0;
  PcaDims pca_dims{8};
  int rerank = 4;
  double search_eps = 1.0;  ///< approximate tree search factor (see IndexOptions)
  SearchMode search_mode = SearchMode::Tree;
  Wrap exemplar_wrap = Wrap::Toroidal;
  UpdateFootprint footprint = UpdateFootprint::Center;
  std::uint64_t seed = 0;
  Dims3 output_dims{64, 64, 64};
  int threads = 0; ///< 0 leaves the OpenMP default

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("synthesis params: " + m); };
    if (pyramid_levels < 1)
      fail("pyramid_levels must be >= 1");
    if (static_cast<int>(window_per_level.size()) != pyramid_levels)
      fail("window_per_level needs " + std::to_string(pyramid_levels) + " entries");
    if (static_cast<int>(iterations_per_level.size()) != pyramid_levels)
      fail("iterations_per_level needs " + std::to_string(pyramid_levels) + " entries");
    for (int w : window_per_level)
      if (w < 2)
        fail("windows must be >= 2");
    for (int it : iterations_per_level)
      if (it < 1)
        fail("iterations must be >= 1");
    if (!(weight_exponent > 0.0) || !std::isfinite(weight_exponent))
      fail("weight_exponent must be positive");
    if (!(histogram_weight >= 0.0) || !std::isfinite(histogram_weight))
      fail("histogram_weight must be >= 0");
    if (pca_dims.value() < 0)
      fail("pca_dims must be positive or full");
    if (rerank < 1)
      fail("rerank must be >= 1");
    if (!(search_eps >= 0.0) || !std::isfinite(search_eps))
      fail("search_eps must be >= 0");
    if (output_dims.nx < 1 || output_dims.ny < 1 || output_dims.nz < 1)
      fail("output dims must be >= 1");
    if (threads < 0)
      fail("threads must be >= 0");
  }
};

/// Robust weighting constant added to squared distances.
inline constexpr double kWeightEpsilon = 1e-4;
/// Floor and ceiling of the histogram penalty factor.
inline constexpr double kPenaltyFloor = 0.05;
inline constexpr double kPenaltyCeil = 1.0;
/// Added to current frequencies before taking target / current.
inline constexpr double kFrequencyDelta = 1e-9;

/// Best exemplar neighborhood for every voxel along each of the three axes.
struct MatchMap {
  Dims3 dims;
  int exemplar_width = 0;
  int exemplar_height = 0;
  int window = 1;                  ///< neighborhood side used by the search
  Wrap exemplar_wrap = Wrap::Toroidal;
  std::vector<std::uint32_t> ids;  ///< [voxel * 3 + axis], scanline id in the exemplar
  std::vector<double> distances;   ///< same layout, squared error

  MatchMap() = default;
  MatchMap(Dims3 d, int ex_w, int ex_h, int window = 1, Wrap wrap = Wrap::Toroidal)
      : dims(d), exemplar_width(ex_w), exemplar_height(ex_h), window(window), exemplar_wrap(wrap),
        ids(d.count() * 3, 0), distances(d.count() * 3, 0.0) {}

  static std::size_t slot(std::size_t voxel, Axis a) {
    return voxel * 3 + static_cast<std::size_t>(a);
  }

  Match at(std::size_t voxel, Axis a) const {
    const auto id = ids[slot(voxel, a)];
    return {static_cast<int>(id % exemplar_width), static_cast<int>(id / exemplar_width),
            distances[slot(voxel, a)]};
  }

  void set(std::size_t voxel, Axis a, int x, int y, double distance) {
    ids[slot(voxel, a)] = static_cast<std::uint32_t>(y * exemplar_width + x);
    distances[slot(voxel, a)] = distance;
  }

  /// Sum of all squared neighborhood distances.
  double total_energy() const {
    double e = 0.0;
    for (double d : distances)
      e += d;
    return e;
  }
};

inline int gray_bin(float v) {
  return std::clamp(static_cast<int>(std::lround(v)), 0, 255);
}

/// Usage counters steering the optimize step toward the exemplar's gray-level
/// distribution (index histogram) and toward uniform reuse of exemplar pixels
/// (position histogram, counting match centers).
struct UsageHistograms {
  std::array<double, 256> index_target{};
  std::array<std::uint64_t, 256> index_counts{};
  std::uint64_t voxel_count = 0;
  std::vector<std::uint64_t> position_counts;
  std::uint64_t position_total = 0;
  double position_target = 0.0;

  UsageHistograms() = default;

  explicit UsageHistograms(const Image2D& exemplar)
      : position_counts(exemplar.size(), 0),
        position_target(1.0 / static_cast<double>(exemplar.size())) {
    for (float v : exemplar.data())
      index_target[gray_bin(v)] += 1.0;
    for (auto& t : index_target)
      t /= static_cast<double>(exemplar.size());
  }

  void update_index(const Volume3D& volume) {
    index_counts.fill(0);
    for (float v : volume.data())
      ++index_counts[gray_bin(v)];
    voxel_count = volume.size();
  }

  void update_positions(const MatchMap& matches) {
    std::fill(position_counts.begin(), position_counts.end(), 0);
    for (auto id : matches.ids)
      ++position_counts[id];
    position_total = matches.ids.size();
  }

  void update(const Volume3D& volume, const MatchMap& matches) {
    update_index(volume);
    update_positions(matches);
  }

  /// Penalty in [kPenaltyFloor, 1] for a candidate centered on exemplar pixel
  /// `id` with gray value `value`, before the histogram_weight exponent.
  double penalty(std::uint32_t id, float value) const {
    double factor = 1.0;
    if (voxel_count > 0) {
      const int b = gray_bin(value);
      const double current = static_cast<double>(index_counts[b]) / voxel_count;
      factor *= std::clamp(index_target[b] / (current + kFrequencyDelta), kPenaltyFloor, kPenaltyCeil);
    }
    if (position_total > 0) {
      const double current = static_cast<double>(position_counts[id]) / position_total;
      factor *= std::clamp(position_target / (current + kFrequencyDelta), kPenaltyFloor, kPenaltyCeil);
    }
    return std::clamp(factor, kPenaltyFloor, kPenaltyCeil);
  }
};

namespace detail {

template <typename F>
void parallel_for(int n, int threads, F&& body) {
#ifdef _OPENMP
  if (threads > 0) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int i = 0; i < n; ++i)
      body(i);
  } else {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
      body(i);
  }
#else
  (void)threads;
  for (int i = 0; i < n; ++i)
    body(i);
#endif
}

inline int worker_count(int threads) {
#ifdef _OPENMP
  return threads > 0 ? threads : omp_get_max_threads();
#else
  (void)threads;
  return 1;
#endif
}

inline int worker_id() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

/// Toroidally wrapped window coordinates for every position along an extent.
struct WrapTable {
  int window;
  std::vector<int> table; ///< [c * window + k]

  WrapTable(int n, int w) : window(w), table(static_cast<std::size_t>(n) * w) {
    const int o = window_origin(w);
    for (int c = 0; c < n; ++c)
      for (int k = 0; k < w; ++k)
        table[static_cast<std::size_t>(c) * w + k] = wrap_coord(c + o + k, n, Wrap::Toroidal);
  }
  const int* at(int c) const { return table.data() + static_cast<std::size_t>(c) * window; }
};

/// Gathers the three orthogonal in-slice neighborhoods of a voxel; agrees
/// with volume_neighborhood but avoids per-element modulo.
class NeighborhoodGather {
public:
  NeighborhoodGather(const Dims3& d, int window)
      : dims_(d), window_(window), wx_(d.nx, window), wy_(d.ny, window), wz_(d.nz, window) {}

  void gather(const Volume3D& v, Axis axis, int x, int y, int z, float* out) const {
    const std::size_t sx = 1, sy = static_cast<std::size_t>(dims_.nx),
                      sz = static_cast<std::size_t>(dims_.nx) * dims_.ny;
    const float* data = v.data().data();
    const int* us;
    const int* vs;
    std::size_t su, sv, base;
    switch (axis) {
    case Axis::X: us = wy_.at(y); vs = wz_.at(z); su = sy; sv = sz; base = x * sx; break;
    case Axis::Y: us = wx_.at(x); vs = wz_.at(z); su = sx; sv = sz; base = y * sy; break;
    default:      us = wx_.at(x); vs = wy_.at(y); su = sx; sv = sy; base = z * sz; break;
    }
    for (int dv = 0; dv < window_; ++dv) {
      const std::size_t row = base + vs[dv] * sv;
      for (int du = 0; du < window_; ++du)
        *out++ = data[row + us[du] * su];
    }
  }

private:
  Dims3 dims_;
  int window_;
  WrapTable wx_, wy_, wz_;
};

} // namespace detail

/// Random noise drawn from the exemplar's empirical gray-level distribution.
inline Volume3D init_volume(const Image2D& exemplar, Dims3 dims, std::uint64_t seed) {
  Volume3D out(dims);
  std::mt19937_64 rng(seed);
  const auto n = static_cast<unsigned __int128>(exemplar.size());
  const auto src = exemplar.data();
  for (auto& v : out.data()) {
    // Multiply-shift keeps the mapping identical across standard libraries.
    const auto pick = static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
    v = src[pick];
  }
  out.voxel_size = exemplar.pixel_size;
  return out;
}

inline MatchMap search_phase(const Volume3D& volume, const NeighborIndex& index, int threads = 0) {
  const auto& d = volume.dims();
  MatchMap matches(d, index.source_width(), index.source_height(), index.window(),
                   index.options().wrap);
  const detail::NeighborhoodGather gather(d, index.window());
  const int workers = detail::worker_count(threads);
  std::vector<QueryScratch> scratch(workers);
  std::vector<std::vector<float>> probes(workers, std::vector<float>(index.vector_size()));

  detail::parallel_for(d.nz, threads, [&](int z) {
    const int w = detail::worker_id();
    auto& probe = probes[w];
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const std::size_t voxel = volume.index(x, y, z);
        for (Axis a : kAxes) {
          gather.gather(volume, a, x, y, z, probe.data());
          const auto id = index.query_id(probe, scratch[w]);
          const auto slot = MatchMap::slot(voxel, a);
          matches.ids[slot] = id;
          matches.distances[slot] = index.exact_distance(probe, id);
        }
      }
  });
  return matches;
}

struct OptimizeParams {
  double weight_exponent = 0.8;
  double histogram_weight = 1.0;
  int threads = 0;
  UpdateFootprint footprint = UpdateFootprint::Center;
};

/// Weight of one axis' match: robust distance term times histogram penalty.
inline double match_weight(double distance, double penalty, const OptimizeParams& p) {
  double w = std::pow(distance + kWeightEpsilon, (p.weight_exponent - 2.0) / 2.0);
  if (p.histogram_weight > 0.0)
    w *= std::pow(penalty, p.histogram_weight);
  return w;
}

namespace detail {

/// In-slice (u, v) extents and strides of the slices normal to `a`.
struct SliceAxes {
  int nu, nv;
  std::size_t su, sv;
};

inline SliceAxes slice_axes(const Dims3& d, Axis a) {
  const std::size_t sy = static_cast<std::size_t>(d.nx), sz = sy * d.ny;
  switch (a) {
  case Axis::X: return {d.ny, d.nz, sy, sz};
  case Axis::Y: return {d.nx, d.nz, 1, sz};
  default:      return {d.nx, d.ny, 1, sy};
  }
}

} // namespace detail

/// Jacobi update: every voxel becomes the weighted mean of the exemplar values
/// its matches assign to it (see UpdateFootprint). Reads `histograms` as they
/// stood before the sweep; the caller refreshes them afterwards.
inline Volume3D optimize_phase(const Volume3D& volume, const MatchMap& matches,
                               const Image2D& exemplar, const UsageHistograms& histograms,
                               const OptimizeParams& params) {
  if (matches.dims != volume.dims() || matches.exemplar_width != exemplar.width() ||
      matches.exemplar_height != exemplar.height())
    throw ContractError("optimize_phase: match map does not belong to this volume/exemplar");
  Volume3D out(volume.dims());
  out.voxel_size = volume.voxel_size;
  const auto src = exemplar.data();
  const auto& d = volume.dims();
  const std::size_t plane = static_cast<std::size_t>(d.nx) * d.ny;
  auto dst = out.data();

  // Per-pixel penalty^histogram_weight and per-slot robust weight, computed once.
  std::vector<double> pixel_factor(src.size(), 1.0);
  if (params.histogram_weight > 0.0)
    for (std::size_t id = 0; id < src.size(); ++id)
      pixel_factor[id] = std::pow(histograms.penalty(static_cast<std::uint32_t>(id), src[id]),
                                  params.histogram_weight);
  std::vector<double> base(matches.distances.size());
  for (std::size_t i = 0; i < base.size(); ++i)
    base[i] = match_weight(matches.distances[i], 1.0, params);

  if (params.footprint == UpdateFootprint::Center) {
    detail::parallel_for(d.nz, params.threads, [&](int z) {
      for (std::size_t voxel = z * plane; voxel < (z + 1) * plane; ++voxel) {
        double num = 0.0, den = 0.0;
        for (Axis a : kAxes) {
          const auto slot = MatchMap::slot(voxel, a);
          const auto id = matches.ids[slot];
          const double w = base[slot] * pixel_factor[id];
          num += w * src[id];
          den += w;
        }
        dst[voxel] = static_cast<float>(num / den);
      }
    });
    return out;
  }

  const int w = matches.window;
  const int o = window_origin(w);
  const int ew = exemplar.width(), eh = exemplar.height();
  detail::parallel_for(d.nz, params.threads, [&](int z) {
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        double num = 0.0, den = 0.0;
        for (Axis a : kAxes) {
          const auto sa = detail::slice_axes(d, a);
          int qu, qv;
          std::size_t fixed;
          switch (a) {
          case Axis::X: qu = y; qv = z; fixed = static_cast<std::size_t>(x); break;
          case Axis::Y: qu = x; qv = z; fixed = static_cast<std::size_t>(y) * d.nx; break;
          default:      qu = x; qv = y; fixed = static_cast<std::size_t>(z) * plane; break;
          }
          // The window centered at p covers q at offset k = q - p - o.
          for (int kv = 0; kv < w; ++kv) {
            const int pv = wrap_coord(qv - o - kv, sa.nv, Wrap::Toroidal);
            for (int ku = 0; ku < w; ++ku) {
              const int pu = wrap_coord(qu - o - ku, sa.nu, Wrap::Toroidal);
              const std::size_t p = fixed + pu * sa.su + pv * sa.sv;
              const auto slot = MatchMap::slot(p, a);
              const auto id = matches.ids[slot];
              const int ex = wrap_coord(static_cast<int>(id % ew) + o + ku, ew, matches.exemplar_wrap);
              const int ey = wrap_coord(static_cast<int>(id / ew) + o + kv, eh, matches.exemplar_wrap);
              const std::size_t pix = static_cast<std::size_t>(ey) * ew + ex;
              const double wt = base[slot] * pixel_factor[pix];
              num += wt * src[pix];
              den += wt;
            }
          }
        }
        dst[volume.index(x, y, z)] = static_cast<float>(num / den);
      }
  });
  return out;
}

/// Moves every voxel toward the exemplar value of equal rank (histogram
/// specification), by `strength` in [0, 1]. Ties in the volume are ranked by
/// voxel index so the result does not depend on sort stability.
inline void match_histogram(Volume3D& volume, const Image2D& exemplar, double strength) {
  strength = std::clamp(strength, 0.0, 1.0);
  if (strength == 0.0 || volume.size() == 0)
    return;
  std::vector<float> sorted(exemplar.data().begin(), exemplar.data().end());
  std::sort(sorted.begin(), sorted.end());
  auto v = volume.data();
  std::vector<std::uint32_t> order(v.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = static_cast<std::uint32_t>(i);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return v[a] < v[b] || (v[a] == v[b] && a < b);
  });
  const double n = static_cast<double>(order.size());
  const double m = static_cast<double>(sorted.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const auto q = static_cast<std::size_t>((static_cast<double>(rank) + 0.5) * m / n);
    float& x = v[order[rank]];
    x = static_cast<float>(x + strength * (sorted[std::min(q, sorted.size() - 1)] - x));
  }
}

/// Recomputes Σ voxels Σ axes |neighborhood - matched exemplar patch|².
inline double match_energy(const Volume3D& volume, const MatchMap& matches,
                           const NeighborIndex& index) {
  const detail::NeighborhoodGather gather(volume.dims(), index.window());
  std::vector<float> probe(index.vector_size());
  const auto& d = volume.dims();
  double e = 0.0;
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x)
        for (Axis a : kAxes) {
          gather.gather(volume, a, x, y, z, probe.data());
          e += index.exact_distance(probe, matches.ids[MatchMap::slot(volume.index(x, y, z), a)]);
        }
  return e;
}

/// Round half to even and clamp to [0, 255].
inline void quantize_8bit(Volume3D& v) {
  for (auto& x : v.data())
    x = std::clamp(static_cast<float>(std::nearbyint(x)), 0.0f, 255.0f);
}

/// Volume dims at pyramid level k: output dims halved k times, rounding up.
inline Dims3 level_dims(Dims3 out, int k) {
  auto shrink = [k](int n) {
    for (int i = 0; i < k; ++i)
      n = (n + 1) / 2;
    return n;
  };
  return {shrink(out.nx), shrink(out.ny), shrink(out.nz)};
}

struct IterationReport {
  int level;
  int iteration;
  Dims3 dims;
  double energy;     ///< total match energy found by this iteration's search
};

using ProgressFn = std::function<void(const IterationReport&)>;

inline Volume3D synthesize(const Image2D& exemplar, const SynthesisParams& params,
                           const ProgressFn& progress = {}) {
  params.validate();
  const auto pyramid = build_pyramid(exemplar, params.pyramid_levels);
  const int top = params.pyramid_levels - 1;

  IndexOptions index_options;
  index_options.pca_dims = params.pca_dims;
  index_options.rerank = params.rerank;
  index_options.approx_eps = params.search_eps;
  index_options.mode = params.search_mode;
  index_options.wrap = params.exemplar_wrap;
  const OptimizeParams opt{params.weight_exponent, params.histogram_weight, params.threads,
                           params.footprint};

  Volume3D volume = init_volume(pyramid[top], level_dims(params.output_dims, top), params.seed);
  for (int level = top; level >= 0; --level) {
    const auto& ex = pyramid[level];
    if (level != top)
      volume = upsample_volume(volume, level_dims(params.output_dims, level));
    const NeighborIndex index(ex, params.window_per_level[level], index_options);
    UsageHistograms hist(ex);
    hist.update_index(volume);
    for (int it = 0; it < params.iterations_per_level[level]; ++it) {
      const auto matches = search_phase(volume, index, params.threads);
      if (progress)
        progress({level, it, volume.dims(), matches.total_energy()});
      volume = optimize_phase(volume, matches, ex, hist, opt);
      match_histogram(volume, ex, params.histogram_weight);
      hist.update(volume, matches);
    }
  }
  quantize_8bit(volume);
  volume.voxel_size = exemplar.pixel_size;
  return volume;
}

} // namespace solidtex
