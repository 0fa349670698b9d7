#pragma once

#include <cmath>
#include <vector>

#include "grid.hpp"

namespace solidtex {

/// Exemplar at several resolutions; level 0 is the input, each further level
/// halves both sides (rounding up).
struct ExemplarPyramid {
  std::vector<Image2D> levels;

  std::size_t size() const noexcept { return levels.size(); }
  const Image2D& operator[](std::size_t k) const { return levels.at(k); }
  const Image2D& finest() const { return levels.front(); }
  const Image2D& coarsest() const { return levels.back(); }
};

/// 2x2 box-filter reduction. On odd sides the last column/row averages only
/// the pixels that exist.
inline Image2D downsample_box(const Image2D& src) {
  const int w = (src.width() + 1) / 2;
  const int h = (src.height() + 1) / 2;
  Image2D out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      int n = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const int sx = 2 * x + dx, sy = 2 * y + dy;
          if (src.contains(sx, sy)) {
            sum += src(sx, sy);
            ++n;
          }
        }
      out(x, y) = static_cast<float>(sum / n);
    }
  if (src.pixel_size)
    out.pixel_size = *src.pixel_size * 2.0;
  return out;
}

inline ExemplarPyramid build_pyramid(const Image2D& exemplar, int levels) {
  if (levels < 1)
    throw ConfigError("build_pyramid: levels must be >= 1, got " + std::to_string(levels));
  const long need = 1L << (levels - 1);
  if (exemplar.width() < need || exemplar.height() < need)
    throw ConfigError("build_pyramid: exemplar " + std::to_string(exemplar.width()) + "x" +
                      std::to_string(exemplar.height()) + " too small for " +
                      std::to_string(levels) + " levels (needs " + std::to_string(need) +
                      " px per side)");
  ExemplarPyramid p;
  p.levels.reserve(levels);
  p.levels.push_back(exemplar);
  for (int k = 1; k < levels; ++k)
    p.levels.push_back(downsample_box(p.levels.back()));
  return p;
}

namespace detail {

struct LinearTap {
  int i0;
  int i1;
  float t;
};

// Corner-aligned sample positions: output 0 and n_out-1 land on input 0 and n_in-1.
inline std::vector<LinearTap> linear_taps(int n_in, int n_out) {
  std::vector<LinearTap> taps(n_out);
  for (int i = 0; i < n_out; ++i) {
    if (n_in == 1 || n_out == 1) {
      taps[i] = {0, 0, 0.0f};
      continue;
    }
    const double s = static_cast<double>(i) * (n_in - 1) / (n_out - 1);
    const int i0 = std::min(static_cast<int>(std::floor(s)), n_in - 1);
    const int i1 = std::min(i0 + 1, n_in - 1);
    taps[i] = {i0, i1, static_cast<float>(s - i0)};
  }
  return taps;
}

} // namespace detail

inline Volume3D upsample_volume(const Volume3D& coarse, Dims3 target) {
  const auto& c = coarse.dims();
  if (target.nx < c.nx || target.ny < c.ny || target.nz < c.nz)
    throw ContractError("upsample_volume: target dims must be >= coarse dims");
  const auto tx = detail::linear_taps(c.nx, target.nx);
  const auto ty = detail::linear_taps(c.ny, target.ny);
  const auto tz = detail::linear_taps(c.nz, target.nz);
  Volume3D out(target);
  auto lerp = [](float a, float b, float t) { return a + (b - a) * t; };
  for (int z = 0; z < target.nz; ++z)
    for (int y = 0; y < target.ny; ++y)
      for (int x = 0; x < target.nx; ++x) {
        const auto& X = tx[x];
        const auto& Y = ty[y];
        const auto& Z = tz[z];
        const float c00 = lerp(coarse(X.i0, Y.i0, Z.i0), coarse(X.i1, Y.i0, Z.i0), X.t);
        const float c10 = lerp(coarse(X.i0, Y.i1, Z.i0), coarse(X.i1, Y.i1, Z.i0), X.t);
        const float c01 = lerp(coarse(X.i0, Y.i0, Z.i1), coarse(X.i1, Y.i0, Z.i1), X.t);
        const float c11 = lerp(coarse(X.i0, Y.i1, Z.i1), coarse(X.i1, Y.i1, Z.i1), X.t);
        const float v = lerp(lerp(c00, c10, Y.t), lerp(c01, c11, Y.t), Z.t);
        out(x, y, z) = v;
      }
  // lerp in float can overshoot its endpoints by an ulp
  const auto [lo, hi] = value_range(coarse);
  for (auto& v : out.data())
    v = std::clamp(v, lo, hi);
  out.voxel_size = coarse.voxel_size;
  return out;
}

} // namespace solidtex
