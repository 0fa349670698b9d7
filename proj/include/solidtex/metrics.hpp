#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "grid.hpp"

namespace solidtex {

struct GrayHistogram {
  std::array<std::uint64_t, 256> counts{};
  std::uint64_t total = 0;

  template <typename Raster>
  static GrayHistogram of(const Raster& r) {
    GrayHistogram h;
    for (float v : r.data())
      h.add(v);
    return h;
  }

  void add(float v, std::uint64_t n = 1) {
    counts[std::clamp(static_cast<int>(std::lround(v)), 0, 255)] += n;
    total += n;
  }

  int occupied_bins() const {
    return static_cast<int>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
  }
};

namespace detail {

// Least-squares line over points (x, y) given running sums.
struct LineFit {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;

  void add(double x, double y) {
    n += 1; sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
  }
  LineFit minus(const LineFit& o) const {
    return {n - o.n, sx - o.sx, sy - o.sy, sxx - o.sxx, sxy - o.sxy, syy - o.syy};
  }
  double slope() const {
    const double d = n * sxx - sx * sx;
    return d != 0.0 ? (n * sxy - sx * sy) / d : 0.0;
  }
  double intercept() const { return (sy - slope() * sx) / n; }
  double sse() const {
    const double m = slope(), c = intercept();
    // Σ (y - m x - c)^2 expanded
    const double r = syy - 2 * m * sxy - 2 * c * sy + m * m * sxx + 2 * m * c * sx + c * c * n;
    return std::max(r, 0.0);
  }
};

} // namespace detail

/// Pore threshold at the knee of the cumulative gray-level curve. Two lines are
/// fitted by least squares to the cumulative curve on either side of every
/// candidate breakpoint, from just below the darkest occupied level up to the
/// histogram's dominant peak (or the whole occupied range when the peak sits at
/// the start). The best pair's intersection is the overflow point. When that
/// point falls in a run of empty levels, the run's midpoint is returned, since
/// every threshold in the run gives the same partition. Pores are values
/// strictly below the result.
inline int overflow_threshold(const GrayHistogram& hist) {
  if (hist.occupied_bins() < 2)
    throw DegenerateInputError("overflow_threshold: histogram has fewer than 2 occupied levels");
  int lo = 0, hi = 255;
  while (hist.counts[lo] == 0) ++lo;
  while (hist.counts[hi] == 0) --hi;
  const int peak = static_cast<int>(std::max_element(hist.counts.begin(), hist.counts.end()) - hist.counts.begin());

  int end = peak;
  if (end - (lo - 1) < 3)
    end = hi;

  // Cumulative fraction at x = lo-1 .. end.
  std::vector<double> xs, ys;
  double cum = 0.0;
  xs.push_back(lo - 1);
  ys.push_back(0.0);
  for (int g = lo; g <= end; ++g) {
    cum += static_cast<double>(hist.counts[g]) / static_cast<double>(hist.total);
    xs.push_back(g);
    ys.push_back(cum);
  }
  const int n = static_cast<int>(xs.size());
  std::vector<detail::LineFit> prefix(n + 1);
  for (int i = 0; i < n; ++i) {
    prefix[i + 1] = prefix[i];
    prefix[i + 1].add(xs[i], ys[i]);
  }

  double knee = xs[n / 2];
  if (n >= 3) {
    double best = std::numeric_limits<double>::infinity();
    for (int b = 1; b < n - 1; ++b) {
      // segments [0, b] and [b, n-1] share the breakpoint
      const auto left = prefix[b + 1];
      const auto right = prefix[n].minus(prefix[b]);
      const double sse = left.sse() + right.sse();
      if (sse < best - 1e-15) {
        best = sse;
        const double m1 = left.slope(), m2 = right.slope();
        const double c1 = left.intercept(), c2 = right.intercept();
        knee = std::abs(m1 - m2) > 1e-12 ? (c2 - c1) / (m1 - m2) : xs[b];
        if (!(knee >= xs.front() && knee <= xs.back()))
          knee = xs[b];
      }
    }
  }

  int t = std::clamp(static_cast<int>(std::lround(knee)), lo + 1, hi);
  int below = t - 1;
  while (hist.counts[below] == 0) --below;   // terminates at lo
  int above = t;
  while (hist.counts[above] == 0) ++above;   // terminates at hi
  const int t_low = below + 1, t_high = above;
  if (t_high > t_low)
    t = (t_low + t_high) / 2;
  return t;
}

/// Otsu's split k maximizing between-class variance of {<= k} and {> k}; ties
/// go to the smallest k. Particles are values strictly greater than k.
inline int otsu_threshold(const GrayHistogram& hist) {
  if (hist.occupied_bins() < 2)
    throw DegenerateInputError("otsu_threshold: histogram has fewer than 2 occupied levels");
  const auto N = static_cast<long double>(hist.total);
  long double S = 0;
  for (int g = 0; g < 256; ++g)
    S += static_cast<long double>(g) * hist.counts[g];

  long double n0 = 0, s0 = 0;
  long double best = -1;
  int best_k = 0;
  for (int k = 0; k < 255; ++k) {
    n0 += hist.counts[k];
    s0 += static_cast<long double>(k) * hist.counts[k];
    const long double n1 = N - n0;
    if (n0 == 0 || n1 == 0)
      continue;
    // N^2 * between-class variance = (N s0 - n0 S)^2 / (n0 n1)
    const long double a = N * s0 - n0 * S;
    const long double v = a * a / (n0 * n1);
    // Relative margin so exact ties reached along different rounding paths
    // still resolve to the smaller k.
    if (v > best * (1.0L + 1e-15L)) {
      best = v;
      best_k = k;
    }
  }
  return best_k;
}

/// Percentage of values strictly below `threshold`.
template <typename Raster>
double porosity(const Raster& data, double threshold) {
  std::size_t pores = 0;
  for (float v : data.data())
    if (v < threshold)
      ++pores;
  return 100.0 * static_cast<double>(pores) / static_cast<double>(data.size());
}

/// 1 where value > k, else 0.
inline Image2D particle_mask(const Image2D& image, int k) {
  Image2D mask(image.width(), image.height());
  for (std::size_t i = 0; i < image.size(); ++i)
    mask.data()[i] = image.data()[i] > static_cast<float>(k) ? 1.0f : 0.0f;
  return mask;
}

inline constexpr int kMinParticleArea = 2;

/// Areas (pixels) of 8-connected components of the nonzero pixels, in order of
/// each component's first pixel in scanline order. Components touching the
/// border are kept; components smaller than kMinParticleArea are dropped.
inline std::vector<int> label_particles(const Image2D& binary) {
  const int w = binary.width(), h = binary.height();
  std::vector<int> label(binary.size(), -1);
  std::vector<int> areas;
  std::vector<int> stack;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto start = binary.index(x, y);
      if (binary.data()[start] == 0.0f || label[start] >= 0)
        continue;
      const int id = static_cast<int>(areas.size());
      int area = 0;
      label[start] = id;
      stack.push_back(static_cast<int>(start));
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        ++area;
        const int px = p % w, py = p / w;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int qx = px + dx, qy = py + dy;
            if ((dx == 0 && dy == 0) || !binary.contains(qx, qy))
              continue;
            const auto q = binary.index(qx, qy);
            if (binary.data()[q] != 0.0f && label[q] < 0) {
              label[q] = id;
              stack.push_back(static_cast<int>(q));
            }
          }
      }
      areas.push_back(area);
    }
  std::erase_if(areas, [](int a) { return a < kMinParticleArea; });
  return areas;
}

/// Equivalent circular diameter in micrometers.
inline double ecd(double area_px, double pixel_size_um = 1.0) {
  if (!(area_px > 0.0))
    throw ContractError("ecd: area must be positive");
  return pixel_size_um * std::sqrt(4.0 * area_px / std::numbers::pi);
}

struct Section {
  Axis axis;
  int index;
  friend bool operator==(const Section&, const Section&) = default;
};

/// Seeded draw of (axis, index) cross-sections.
inline std::vector<Section> random_sections(const Dims3& dims, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::uint64_t bound) {
    return static_cast<int>((static_cast<unsigned __int128>(rng()) * bound) >> 64);
  };
  std::vector<Section> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto axis = kAxes[pick(3)];
    out.push_back({axis, pick(static_cast<std::uint64_t>(dims[axis]))});
  }
  return out;
}

struct PsdBins {
  double min_um = 1.0;
  double max_um = 100.0;
  int count = 20;

  /// Log-spaced edges, count + 1 of them.
  std::vector<double> edges() const {
    std::vector<double> e(count + 1);
    const double a = std::log(min_um), b = std::log(max_um);
    for (int i = 0; i <= count; ++i)
      e[i] = std::exp(a + (b - a) * i / count);
    e.front() = min_um;
    e.back() = max_um;
    return e;
  }

  /// Bin of a diameter; values outside the range land in the edge bins.
  int bin_of(double d) const {
    if (d <= min_um)
      return 0;
    if (d >= max_um)
      return count - 1;
    const double t = (std::log(d) - std::log(min_um)) / (std::log(max_um) - std::log(min_um));
    return std::clamp(static_cast<int>(std::floor(t * count)), 0, count - 1);
  }
};

struct PsdReport {
  std::vector<double> bin_edges;     ///< ECD micrometers
  std::vector<double> frequencies;   ///< fraction of particles per bin
  std::vector<double> diameters;     ///< every particle's ECD, in section order
  int n_sections = 0;
  int n_particles = 0;
  std::optional<int> threshold;      ///< particle threshold used, if any

  double mean_diameter() const {
    if (diameters.empty())
      return 0.0;
    double s = 0.0;
    for (double d : diameters)
      s += d;
    return s / static_cast<double>(diameters.size());
  }

  friend bool operator==(const PsdReport&, const PsdReport&) = default;
};

/// Particle sizes over a set of 2D images with one fixed particle threshold.
inline PsdReport psd_of_images(std::span<const Image2D> images, std::optional<int> threshold,
                               double pixel_size_um, const PsdBins& bins = {}) {
  PsdReport r;
  r.bin_edges = bins.edges();
  r.frequencies.assign(bins.count, 0.0);
  r.n_sections = static_cast<int>(images.size());
  r.threshold = threshold;
  if (threshold) {
    for (const auto& img : images)
      for (int area : label_particles(particle_mask(img, *threshold)))
        r.diameters.push_back(ecd(area, pixel_size_um));
  }
  r.n_particles = static_cast<int>(r.diameters.size());
  for (double d : r.diameters)
    r.frequencies[bins.bin_of(d)] += 1.0;
  if (r.n_particles > 0)
    for (auto& f : r.frequencies)
      f /= r.n_particles;
  return r;
}

/// Otsu threshold of the histogram, or nothing for a single-level histogram
/// (no phase contrast, hence no particles).
inline std::optional<int> particle_threshold(const GrayHistogram& h) {
  if (h.occupied_bins() < 2)
    return std::nullopt;
  return otsu_threshold(h);
}

/// Particle size distribution over `n_sections` random cross-sections. The
/// particle threshold comes from the whole-volume histogram unless given.
inline PsdReport psd(const Volume3D& volume, int n_sections, std::uint64_t seed,
                     double pixel_size_um, std::optional<int> threshold = std::nullopt,
                     const PsdBins& bins = {}) {
  if (n_sections < 1)
    throw ContractError("psd: n_sections must be >= 1");
  if (!threshold)
    threshold = particle_threshold(GrayHistogram::of(volume));
  std::vector<Image2D> sections;
  sections.reserve(n_sections);
  for (const auto& s : random_sections(volume.dims(), n_sections, seed))
    sections.push_back(slice_extract(volume, s.axis, s.index));
  return psd_of_images(sections, threshold, pixel_size_um, bins);
}

struct GlcmMatrix {
  int levels = 0;
  int offset = 1;
  int angle = 0;
  std::vector<double> p; ///< row-major levels x levels, reference gray as row

  double operator()(int i, int j) const { return p[static_cast<std::size_t>(i) * levels + j]; }
};

/// Uniform requantization of an 8-bit gray value to `levels` levels.
inline int quantize_level(float v, int levels) {
  const int g = std::clamp(static_cast<int>(std::lround(v)), 0, 255);
  return g * levels / 256;
}

inline std::pair<int, int> glcm_displacement(int offset, int angle) {
  switch (angle) {
  case 0: return {offset, 0};
  case 45: return {offset, -offset};
  case 90: return {0, -offset};
  case 135: return {-offset, -offset};
  default: throw ContractError("glcm: angle must be 0, 45, 90 or 135");
  }
}

/// Normalized, non-symmetric co-occurrence matrix of ordered (reference,
/// target) pairs at displacement (offset cos θ, -offset sin θ).
inline GlcmMatrix glcm(const Image2D& image, int offset, int angle, int levels) {
  if (offset < 1)
    throw ContractError("glcm: offset must be >= 1");
  if (levels < 2 || levels > 256)
    throw ContractError("glcm: levels must be in [2, 256]");
  const auto [dx, dy] = glcm_displacement(offset, angle);
  GlcmMatrix m{levels, offset, angle, std::vector<double>(static_cast<std::size_t>(levels) * levels, 0.0)};
  std::vector<int> q(image.size());
  for (std::size_t i = 0; i < image.size(); ++i)
    q[i] = quantize_level(image.data()[i], levels);
  std::uint64_t pairs = 0;
  for (int y = std::max(0, -dy); y < std::min(image.height(), image.height() - dy); ++y)
    for (int x = std::max(0, -dx); x < std::min(image.width(), image.width() - dx); ++x) {
      const int i = q[image.index(x, y)], j = q[image.index(x + dx, y + dy)];
      m.p[static_cast<std::size_t>(i) * levels + j] += 1.0;
      ++pairs;
    }
  if (pairs == 0)
    throw DegenerateInputError("glcm: image " + std::to_string(image.width()) + "x" +
                               std::to_string(image.height()) + " smaller than displacement");
  for (auto& v : m.p)
    v /= static_cast<double>(pairs);
  return m;
}

struct GlcmStats {
  double contrast = 0.0;
  double homogeneity = 0.0;
};

inline GlcmStats glcm_stats(const GlcmMatrix& m) {
  GlcmStats s;
  for (int i = 0; i < m.levels; ++i)
    for (int j = 0; j < m.levels; ++j) {
      const double p = m(i, j);
      if (p == 0.0)
        continue;
      const double d2 = static_cast<double>(i - j) * (i - j);
      s.contrast += p * d2;
      s.homogeneity += p / (1.0 + d2);
    }
  return s;
}

struct GlcmOptions {
  int offset = 1;
  std::vector<int> angles{0, 90};
  int levels = 256;
};

/// Contrast and homogeneity averaged over the configured angles.
inline GlcmStats glcm_features(const Image2D& image, const GlcmOptions& opt = {}) {
  if (opt.angles.empty())
    throw ContractError("glcm_features: no angles");
  GlcmStats mean;
  for (int a : opt.angles) {
    const auto s = glcm_stats(glcm(image, opt.offset, a, opt.levels));
    mean.contrast += s.contrast;
    mean.homogeneity += s.homogeneity;
  }
  mean.contrast /= static_cast<double>(opt.angles.size());
  mean.homogeneity /= static_cast<double>(opt.angles.size());
  return mean;
}

/// Mean GLCM features over random cross-sections of a volume.
inline GlcmStats glcm_features(const Volume3D& volume, int n_sections, std::uint64_t seed,
                               const GlcmOptions& opt = {}) {
  if (n_sections < 1)
    throw ContractError("glcm_features: n_sections must be >= 1");
  GlcmStats mean;
  for (const auto& s : random_sections(volume.dims(), n_sections, seed)) {
    const auto f = glcm_features(slice_extract(volume, s.axis, s.index), opt);
    mean.contrast += f.contrast;
    mean.homogeneity += f.homogeneity;
  }
  mean.contrast /= n_sections;
  mean.homogeneity /= n_sections;
  return mean;
}

/// Chi-square distance between two normalized gray-level histograms,
/// Σ (p - q)^2 / (p + q) over bins where p + q > 0.
inline double chi_square(const GrayHistogram& a, const GrayHistogram& b) {
  double d = 0.0;
  for (int g = 0; g < 256; ++g) {
    const double p = static_cast<double>(a.counts[g]) / static_cast<double>(a.total);
    const double q = static_cast<double>(b.counts[g]) / static_cast<double>(b.total);
    if (p + q > 0.0)
      d += (p - q) * (p - q) / (p + q);
  }
  return d;
}

} // namespace solidtex
