#pragma once

// Generators shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "solidtex/grid.hpp"

namespace solidtex::fixtures {

inline Image2D random_image(int w, int h, std::uint64_t seed, int max_value = 255) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, max_value);
  Image2D img(w, h);
  for (auto& v : img.data())
    v = static_cast<float>(d(rng));
  return img;
}

inline Volume3D random_volume(Dims3 dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, 255);
  Volume3D v(dims);
  for (auto& x : v.data())
    x = static_cast<float>(d(rng));
  return v;
}

/// Gaussian-smoothed white noise on a torus, as doubles.
inline std::vector<double> smooth_noise(int w, int h, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> a(static_cast<std::size_t>(w) * h);
  for (auto& v : a)
    v = n(rng);
  const int r = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * r + 1);
  for (int i = -r; i <= r; ++i)
    k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  std::vector<double> tmp(a.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i)
        s += k[i + r] * a[y * w + ((x + i) % w + w) % w];
      tmp[y * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i)
        s += k[i + r] * tmp[(((y + i) % h + h) % h) * w + x];
      a[y * w + x] = s;
    }
  return a;
}

/// Continuous gray exemplar: smoothed noise stretched to [0, 255], rounded.
inline Image2D smooth_noise_image(int size, double sigma, std::uint64_t seed) {
  const auto a = smooth_noise(size, size, sigma, seed);
  const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
  Image2D img(size, size);
  for (std::size_t i = 0; i < a.size(); ++i)
    img.data()[i] = static_cast<float>(std::round(255.0 * (a[i] - *lo) / (*hi - *lo)));
  return img;
}

/// Binary exemplar: smoothed noise thresholded so that `pore_fraction` of the
/// pixels are dark (0) pores in a bright (255) matrix.
inline Image2D blob_exemplar(int size, double pore_fraction, std::uint64_t seed, double sigma = 2.5) {
  const auto a = smooth_noise(size, size, sigma, seed);
  auto sorted = a;
  const auto cut = static_cast<std::size_t>(pore_fraction * static_cast<double>(a.size()));
  std::nth_element(sorted.begin(), sorted.begin() + cut, sorted.end());
  const double t = sorted[cut];
  Image2D img(size, size);
  for (std::size_t i = 0; i < a.size(); ++i)
    img.data()[i] = a[i] < t ? 0.0f : 255.0f;
  return img;
}

/// Three-phase BSE-like exemplar: dark pores, mid-gray matrix and bright
/// grains, with mild noise.
inline Image2D bse_like_exemplar(int size, std::uint64_t seed) {
  const auto a = smooth_noise(size, size, 2.0, seed);
  const auto b = smooth_noise(size, size, 4.0, seed + 7);
  std::mt19937_64 rng(seed + 13);
  std::normal_distribution<double> noise(0.0, 6.0);
  auto quantile = [](std::vector<double> v, double q) {
    const auto k = static_cast<std::size_t>(q * static_cast<double>(v.size()));
    std::nth_element(v.begin(), v.begin() + k, v.end());
    return v[k];
  };
  const double pore_t = quantile(a, 0.12), grain_t = quantile(b, 0.80);
  Image2D img(size, size);
  for (std::size_t i = 0; i < a.size(); ++i) {
    double g = 120.0;
    if (b[i] > grain_t)
      g = 215.0;
    if (a[i] < pore_t)
      g = 25.0;
    img.data()[i] = static_cast<float>(std::clamp(std::round(g + noise(rng)), 0.0, 255.0));
  }
  return img;
}

} // namespace solidtex::fixtures
