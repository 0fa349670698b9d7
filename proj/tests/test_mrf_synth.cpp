#include <gtest/gtest.h>

#include "solidtex/metrics.hpp"
#include "solidtex/mrf_synth.hpp"
#include "support.hpp"

using namespace solidtex;

namespace {

// Exhaustive reference for search_phase: slice out each cross-section and
// scan every exemplar neighborhood.
MatchMap triple_loop_search(const Volume3D& v, const Image2D& ex, int w) {
  const auto& d = v.dims();
  MatchMap m(d, ex.width(), ex.height(), w);
  for (Axis a : kAxes) {
    const int n = d[a];
    for (int s = 0; s < n; ++s) {
      const auto slice = slice_extract(v, a, s);
      for (int sv = 0; sv < slice.height(); ++sv)
        for (int su = 0; su < slice.width(); ++su) {
          const auto probe = neighborhood_extract(slice, su, sv, w).values;
          double best = std::numeric_limits<double>::infinity();
          int bx = 0, by = 0;
          for (int y = 0; y < ex.height(); ++y)
            for (int x = 0; x < ex.width(); ++x) {
              const auto c = neighborhood_extract(ex, x, y, w).values;
              double dd = 0;
              for (std::size_t k = 0; k < c.size(); ++k)
                dd += (static_cast<double>(probe[k]) - c[k]) * (static_cast<double>(probe[k]) - c[k]);
              if (dd < best) {
                best = dd;
                bx = x;
                by = y;
              }
            }
          const auto p = slice_to_voxel(a, s, su, sv);
          m.set(v.index(p[0], p[1], p[2]), a, bx, by, best);
        }
    }
  }
  return m;
}

SynthesisParams small_params(std::uint64_t seed) {
  SynthesisParams p;
  p.pyramid_levels = 2;
  p.window_per_level = {4, 4};
  p.iterations_per_level = {3, 3};
  p.output_dims = {12, 10, 8};
  p.seed = seed;
  return p;
}

} // namespace

TEST(InitVolume, ConstantExemplar) {
  const auto v = init_volume(Image2D(5, 5, 50.0f), {4, 3, 2}, 1);
  for (float x : v.data())
    EXPECT_EQ(x, 50.0f);
}

TEST(InitVolume, Deterministic) {
  const auto ex = fixtures::random_image(16, 16, 2);
  EXPECT_EQ(init_volume(ex, {8, 8, 8}, 99), init_volume(ex, {8, 8, 8}, 99));
  EXPECT_FALSE(init_volume(ex, {8, 8, 8}, 99) == init_volume(ex, {8, 8, 8}, 100));
}

TEST(InitVolume, HistogramFollowsExemplar) {
  const auto ex = fixtures::bse_like_exemplar(64, 3);
  const auto v = init_volume(ex, {64, 64, 64}, 3);
  const auto target = GrayHistogram::of(ex);
  const double ours = chi_square(GrayHistogram::of(v), target);
  const double uniform = chi_square(GrayHistogram::of(fixtures::random_volume({64, 64, 64}, 3)), target);
  EXPECT_LE(ours * 10.0, uniform) << "init " << ours << " uniform " << uniform;
}

TEST(SearchPhase, SelfMatchOnZSlices) {
  const auto ex = fixtures::random_image(10, 10, 4);
  Volume3D v({10, 10, 5});
  for (int z = 0; z < 5; ++z)
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x)
        v(x, y, z) = ex(x, y);
  const auto m = search_phase(v, NeighborIndex(ex, 4));
  for (int z = 0; z < 5; ++z)
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x)
        ASSERT_EQ(m.at(v.index(x, y, z), Axis::Z), (Match{x, y, 0.0}));
}

TEST(SearchPhase, ConstantInputs) {
  const auto m = search_phase(Volume3D({4, 5, 6}, 30.0f), NeighborIndex(Image2D(6, 6, 30.0f), 3));
  for (std::size_t v = 0; v < m.dims.count(); ++v)
    for (Axis a : kAxes)
      ASSERT_EQ(m.at(v, a), (Match{0, 0, 0.0}));
}

TEST(SearchPhase, MatchesTripleLoopReference) {
  const auto ex = fixtures::random_image(8, 8, 5);
  const auto v = fixtures::random_volume({8, 8, 8}, 6);
  const auto got = search_phase(v, NeighborIndex(ex, 4));
  const auto want = triple_loop_search(v, ex, 4);
  EXPECT_EQ(got.ids, want.ids);
  EXPECT_EQ(got.distances, want.distances);
}

TEST(SearchPhase, IndependentOfThreadCount) {
  const auto ex = fixtures::bse_like_exemplar(32, 7);
  const auto v = fixtures::random_volume({9, 7, 6}, 7);
  const NeighborIndex index(ex, 6, IndexOptions{.pca_dims = PcaDims(6), .rerank = 3});
  const auto a = search_phase(v, index, 1), b = search_phase(v, index, 3);
  EXPECT_EQ(a.ids, b.ids);
  EXPECT_EQ(a.distances, b.distances);
}

TEST(OptimizePhase, EqualCentersGiveThatValue) {
  Image2D ex(4, 4, 0.0f);
  ex(1, 2) = 73.0f;
  ex(3, 0) = 73.0f;
  const Volume3D v({2, 2, 2}, 5.0f);
  MatchMap m(v.dims(), 4, 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    m.set(i, Axis::X, 1, 2, 10.0 * i);
    m.set(i, Axis::Y, 3, 0, 3.0);
    m.set(i, Axis::Z, 1, 2, 0.0);
  }
  const auto out = optimize_phase(v, m, ex, UsageHistograms(ex), {.weight_exponent = 0.8, .histogram_weight = 0.0});
  for (float x : out.data())
    EXPECT_EQ(x, 73.0f);
}

TEST(OptimizePhase, EqualDistancesGiveArithmeticMean) {
  Image2D ex(3, 1, std::vector<float>{10, 20, 60});
  const Volume3D v({1, 1, 1});
  MatchMap m(v.dims(), 3, 1);
  m.set(0, Axis::X, 0, 0, 42.0);
  m.set(0, Axis::Y, 1, 0, 42.0);
  m.set(0, Axis::Z, 2, 0, 42.0);
  const auto out = optimize_phase(v, m, ex, UsageHistograms(ex), {.weight_exponent = 0.8, .histogram_weight = 0.0});
  EXPECT_FLOAT_EQ(out(0, 0, 0), 30.0f);
}

TEST(OptimizePhase, HandComputedTable) {
  // Exemplar values 10 i + 5; voxel v, axis a matched to id (5v + 3a) mod 16 at
  // distance 50 ((v + a) mod 4). Index histogram from a volume holding
  // (v mod 8) 10 + 5, so the eight darkest levels are twice their target.
  // Expected values computed separately and frozen.
  std::vector<float> exv(16);
  for (int i = 0; i < 16; ++i)
    exv[i] = static_cast<float>(10 * i + 5);
  const Image2D ex(4, 4, exv);
  Volume3D v({4, 4, 4}), hist_source({4, 4, 4});
  MatchMap m(v.dims(), 4, 4);
  for (int i = 0; i < 64; ++i) {
    for (int a = 0; a < 3; ++a) {
      const int id = (5 * i + 3 * a) % 16;
      m.set(i, kAxes[a], id % 4, id / 4, ((i + a) % 4) * 50.0);
    }
    hist_source.data()[i] = static_cast<float>((i % 8) * 10 + 5);
  }
  UsageHistograms h(ex);
  h.update(hist_source, m);

  struct Case { double r, hw; std::array<double, 16> want; };
  const Case cases[] = {
      {0.8, 1.0, {5.02647649, 85.3091574, 5.10135257, 25.0625791, 45.0415279, 118.348053, 45.0442984, 65.0169193,
                  85.0264765, 91.7218423, 84.9895125, 105.008464, 124.998863, 38.3480532, 124.98656, 144.969356}},
      {0.8, 0.0, {5.02647649, 78.3480532, 5.05069899, 25.0370034, 45.0264765, 118.348053, 45.0192019, 65.0055104,
                  85.0264765, 71.842453, 84.9790297, 105.00551, 124.986312, 38.3480532, 124.97903, 144.944629}},
      {2.0, 2.0, {35, 95.0000001, 107.222222, 116.666667, 90.0000002, 125, 106.666667, 80.0000002,
                  115, 96.6666671, 70.0000002, 115, 127.222222, 45, 105, 117.222222}},
  };
  for (const auto& c : cases) {
    const auto out = optimize_phase(v, m, ex, h, {.weight_exponent = c.r, .histogram_weight = c.hw});
    for (int i = 0; i < 64; ++i)
      EXPECT_NEAR(out.data()[i], c.want[i % 16], 2e-4) << "voxel " << i << " r " << c.r << " hw " << c.hw;
  }
}

TEST(OptimizePhase, OverlapFootprintAveragesEveryCoveringPatch) {
  const auto ex = fixtures::random_image(7, 6, 8);
  const auto v = fixtures::random_volume({5, 4, 3}, 8);
  const int w = 3;
  const auto m = search_phase(v, NeighborIndex(ex, w));
  const auto got = optimize_phase(v, m, ex, UsageHistograms(ex),
                                  {.weight_exponent = 2.0, .histogram_weight = 0.0, .footprint = UpdateFootprint::Overlap});
  // Scatter every matched patch onto the voxels it covers and average.
  std::vector<double> sum(v.size(), 0.0), count(v.size(), 0.0);
  const auto& d = v.dims();
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x)
        for (Axis a : kAxes) {
          const auto match = m.at(v.index(x, y, z), a);
          for (int kv = 0; kv < w; ++kv)
            for (int ku = 0; ku < w; ++ku) {
              int p[3] = {x, y, z};
              const int iu = a == Axis::X ? 1 : 0, iv = a == Axis::Z ? 1 : 2;
              p[iu] = wrap_coord(p[iu] - 1 + ku, a == Axis::X ? d.ny : d.nx, Wrap::Toroidal);
              p[iv] = wrap_coord(p[iv] - 1 + kv, a == Axis::Z ? d.ny : d.nz, Wrap::Toroidal);
              const auto q = v.index(p[0], p[1], p[2]);
              sum[q] += ex(wrap_coord(match.x - 1 + ku, 7, Wrap::Toroidal), wrap_coord(match.y - 1 + kv, 6, Wrap::Toroidal));
              count[q] += 1;
            }
        }
  for (std::size_t i = 0; i < v.size(); ++i) {
    ASSERT_EQ(count[i], 3.0 * w * w);
    EXPECT_NEAR(got.data()[i], sum[i] / count[i], 1e-3);
  }
}

TEST(OptimizePhase, RejectsForeignMatchMap) {
  const Image2D ex(4, 4);
  EXPECT_THROW(optimize_phase(Volume3D({2, 2, 2}), MatchMap({2, 2, 3}, 4, 4), ex, UsageHistograms(ex), {}),
               ContractError);
}

TEST(OptimizePhase, LeastSquaresUpdateNeverRaisesEnergy) {
  // With exact search, r = 2 and no histogram term, each (search, optimize)
  // round cannot increase the total match energy.
  const Image2D exemplars[] = {fixtures::blob_exemplar(24, 0.3, 1), fixtures::bse_like_exemplar(24, 2),
                               fixtures::random_image(16, 16, 3)};
  for (const auto& ex : exemplars) {
    const NeighborIndex index(ex, 4);
    auto v = init_volume(ex, {10, 10, 10}, 4);
    const UsageHistograms h(ex);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 6; ++it) {
      const auto m = search_phase(v, index);
      const double e = m.total_energy();
      EXPECT_LE(e, prev * (1 + 1e-12)) << "iteration " << it;
      EXPECT_NEAR(match_energy(v, m, index), e, 1e-9 * std::max(1.0, e));
      prev = e;
      v = optimize_phase(v, m, ex, h, {.weight_exponent = 2.0, .histogram_weight = 0.0, .footprint = UpdateFootprint::Overlap});
    }
  }
}

TEST(UsageHistograms, PenaltyFollowsRatios) {
  // Two-level exemplar: half 0, half 200.
  Image2D ex(4, 1, std::vector<float>{0, 0, 200, 200});
  UsageHistograms h(ex);
  EXPECT_DOUBLE_EQ(h.index_target[0], 0.5);
  EXPECT_EQ(h.penalty(0, 0.0f), 1.0); // nothing recorded yet
  Volume3D v({4, 1, 1}, std::vector<float>{200, 200, 200, 0});
  h.update_index(v);
  EXPECT_NEAR(h.penalty(2, 200.0f), 0.5 / 0.75, 1e-6);
  EXPECT_EQ(h.penalty(0, 0.0f), 1.0);
  MatchMap m({4, 1, 1}, 4, 1);
  std::fill(m.ids.begin(), m.ids.end(), 3u);
  h.update_positions(m);
  EXPECT_NEAR(h.penalty(3, 200.0f), 0.25 * 0.5 / 0.75, 1e-6);
  EXPECT_EQ(h.penalty(1, 0.0f), 1.0); // unused position, underused level
}

TEST(UsageHistograms, PenaltyIsFloored) {
  Image2D ex(16, 1, 0.0f);
  ex(5, 0) = 200.0f;
  UsageHistograms h(ex);
  MatchMap m({2, 2, 2}, 16, 1);
  std::fill(m.ids.begin(), m.ids.end(), 5u);
  h.update(Volume3D({2, 2, 2}, 200.0f), m);
  EXPECT_DOUBLE_EQ(h.penalty(5, 200.0f), kPenaltyFloor); // (1/16)^2 before clamping
}

TEST(MatchHistogram, FullStrengthCopiesExemplarDistribution) {
  const auto ex = fixtures::bse_like_exemplar(16, 9);
  auto v = fixtures::random_volume({16, 8, 2}, 9);
  const auto before = v;
  match_histogram(v, ex, 1.0);
  EXPECT_EQ(chi_square(GrayHistogram::of(v), GrayHistogram::of(ex)), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v.size(); j += 37)
      if (before.data()[i] < before.data()[j])
        ASSERT_LE(v.data()[i], v.data()[j]);
}

TEST(MatchHistogram, ZeroStrengthIsNoOp) {
  const auto ex = fixtures::bse_like_exemplar(16, 9);
  auto v = fixtures::random_volume({5, 5, 5}, 9);
  const auto before = v;
  match_histogram(v, ex, 0.0);
  EXPECT_EQ(v, before);
}

TEST(Quantize, RoundsHalfToEvenAndClamps) {
  Volume3D v({7, 1, 1}, std::vector<float>{0.5f, 1.5f, 2.5f, 2.4999f, -3.0f, 300.0f, 254.5f});
  quantize_8bit(v);
  EXPECT_EQ(std::vector<float>(v.data().begin(), v.data().end()),
            (std::vector<float>{0, 2, 2, 2, 0, 255, 254}));
}

TEST(LevelDims, HalveRoundingUp) {
  EXPECT_EQ(level_dims({64, 64, 64}, 2), (Dims3{16, 16, 16}));
  EXPECT_EQ(level_dims({5, 9, 1}, 1), (Dims3{3, 5, 1}));
  EXPECT_EQ(level_dims({5, 9, 1}, 0), (Dims3{5, 9, 1}));
}

TEST(Synthesize, ConstantExemplarGivesConstantVolume) {
  auto p = small_params(1);
  const auto v = synthesize(Image2D(16, 16, 42.0f), p);
  EXPECT_EQ(v.dims(), p.output_dims);
  for (float x : v.data())
    ASSERT_EQ(x, 42.0f);
}

TEST(Synthesize, DeterministicAcrossRunsAndThreads) {
  const auto ex = fixtures::bse_like_exemplar(24, 5);
  auto p = small_params(7);
  p.threads = 1;
  const auto a = synthesize(ex, p);
  const auto b = synthesize(ex, p);
  p.threads = 3;
  const auto c = synthesize(ex, p);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  p.seed = 8;
  EXPECT_FALSE(synthesize(ex, p) == a);
}

TEST(Synthesize, OutputIsEightBit) {
  const auto v = synthesize(fixtures::bse_like_exemplar(24, 6), small_params(2));
  for (float x : v.data()) {
    ASSERT_EQ(x, std::nearbyint(x));
    ASSERT_GE(x, 0.0f);
    ASSERT_LE(x, 255.0f);
  }
}

TEST(Synthesize, ReportsEveryIteration) {
  std::vector<IterationReport> seen;
  synthesize(fixtures::bse_like_exemplar(24, 6), small_params(2), [&](const IterationReport& r) { seen.push_back(r); });
  ASSERT_EQ(seen.size(), 6u);
  EXPECT_EQ(seen.front().level, 1);
  EXPECT_EQ(seen.front().dims, (Dims3{6, 5, 4}));
  EXPECT_EQ(seen.back().level, 0);
  EXPECT_EQ(seen.back().iteration, 2);
}

TEST(Synthesize, RejectsBadParameters) {
  const Image2D ex(16, 16);
  auto p = small_params(1);
  p.window_per_level = {4};
  EXPECT_THROW(synthesize(ex, p), ConfigError);
  p = small_params(1);
  p.weight_exponent = 0;
  EXPECT_THROW(synthesize(ex, p), ConfigError);
  p = small_params(1);
  p.pyramid_levels = 6;
  p.window_per_level.assign(6, 2);
  p.iterations_per_level.assign(6, 1);
  EXPECT_THROW(synthesize(ex, p), ConfigError);
}

TEST(Synthesize, ValuesStayWithinExemplarRange) {
  auto ex = fixtures::random_image(24, 24, 6, 140);
  for (auto& v : ex.data())
    v += 40.0f;
  for (auto footprint : {UpdateFootprint::Center, UpdateFootprint::Overlap}) {
    auto p = small_params(3);
    p.footprint = footprint;
    const auto v = synthesize(ex, p);
    const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
    EXPECT_GE(*lo, 40.0f);
    EXPECT_LE(*hi, 180.0f);
  }
}
