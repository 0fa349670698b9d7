#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "grid.hpp"
#include "kdtree.hpp"

namespace solidtex {

/// Dimensionality of the search space: a count of principal components, or
/// the full w*w neighborhood with no projection.
class PcaDims {
public:
  constexpr PcaDims() = default;
  constexpr explicit PcaDims(int dims) : dims_(dims) {}
  static constexpr PcaDims full() { return PcaDims{}; }

  constexpr bool is_full() const noexcept { return dims_ == 0; }
  constexpr int value() const noexcept { return dims_; }

  friend constexpr bool operator==(PcaDims, PcaDims) = default;

private:
  int dims_ = 0;
};

enum class SearchMode { Tree, Exhaustive };

struct IndexOptions {
  PcaDims pca_dims = PcaDims::full();
  /// Nearest candidates taken in the projected space and re-ranked by exact
  /// distance. 1 returns the projected-space nearest neighbor as is.
  int rerank = 1;
  SearchMode mode = SearchMode::Tree;
  Wrap wrap = Wrap::Toroidal;
  /// Approximation factor of the tree search in the projected space; 0 is
  /// exact. Only used when a projection is active.
  double approx_eps = 0.0;
};

struct Match {
  int x = 0;
  int y = 0;
  double distance = 0.0; ///< squared error in the unprojected space

  friend bool operator==(const Match&, const Match&) = default;
};

/// Per-thread buffers for allocation-free queries.
struct QueryScratch {
  std::vector<float> projected;
  NeighborList best;
};

/// Every exemplar neighborhood of one window size, with an optional PCA
/// projection and a kd-tree over the (projected) vectors. Immutable once
/// built; concurrent queries are safe given one QueryScratch per thread.
class NeighborIndex {
public:
  NeighborIndex(const Image2D& exemplar, int window, IndexOptions options = {})
      : window_(window), width_(exemplar.width()), height_(exemplar.height()),
        options_(options) {
    const int full = window * window;
    if (window < 1 || window > std::min(width_, height_))
      throw ConfigError("build_index: window " + std::to_string(window) +
                        " must be in [1, min(exemplar dims)]");
    if (!options.pca_dims.is_full() &&
        (options.pca_dims.value() < 1 || options.pca_dims.value() > full))
      throw ConfigError("build_index: pca_dims must be in [1, " + std::to_string(full) + "]");
    if (options.rerank < 1)
      throw ConfigError("build_index: rerank must be >= 1");
    if (!(options.approx_eps >= 0.0) || !std::isfinite(options.approx_eps))
      throw ConfigError("build_index: approx_eps must be >= 0");

    const std::size_t n = exemplar.size();
    candidates_.resize(n * full);
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x) {
        const auto nb = neighborhood_extract(exemplar, x, y, window, options.wrap);
        std::copy(nb.values.begin(), nb.values.end(),
                  candidates_.begin() + static_cast<std::ptrdiff_t>(exemplar.index(x, y)) * full);
      }
    centers_.assign(exemplar.data().begin(), exemplar.data().end());
    collect_unique(n);

    if (options.pca_dims.is_full() || options.pca_dims.value() == full) {
      search_dim_ = full;
      search_points_.resize(unique_ids_.size() * full);
      for (std::size_t i = 0; i < unique_ids_.size(); ++i)
        std::copy_n(candidate(unique_ids_[i]).begin(), full, search_points_.begin() + i * full);
    } else {
      search_dim_ = options.pca_dims.value();
      fit_projection(n, full);
    }
    if (options.mode == SearchMode::Tree)
      tree_ = KdTree(search_points_, search_dim_);
  }

  int window() const noexcept { return window_; }
  int source_width() const noexcept { return width_; }
  int source_height() const noexcept { return height_; }
  std::size_t candidate_count() const noexcept { return centers_.size(); }
  /// Candidates left after merging identical neighborhoods.
  std::size_t distinct_count() const noexcept { return unique_ids_.size(); }
  int vector_size() const noexcept { return window_ * window_; }
  int search_dims() const noexcept { return search_dim_; }
  const IndexOptions& options() const noexcept { return options_; }

  /// Rows are orthonormal principal directions, strongest first.
  const std::optional<Eigen::MatrixXf>& projection() const noexcept { return projection_; }
  const Eigen::VectorXf& mean() const noexcept { return mean_; }

  std::span<const float> candidate(std::size_t id) const {
    return std::span<const float>(candidates_).subspan(id * vector_size(), vector_size());
  }
  /// Exemplar value at the candidate's center pixel.
  float center_value(std::size_t id) const { return centers_[id]; }

  Match query(const NeighborhoodVector& probe) const {
    if (probe.window != window_)
      throw ContractError("query: probe window " + std::to_string(probe.window) +
                          " does not match index window " + std::to_string(window_));
    QueryScratch scratch;
    return query(probe.values, scratch);
  }

  Match query(std::span<const float> probe, QueryScratch& scratch) const {
    const auto id = query_id(probe, scratch);
    return {static_cast<int>(id % width_), static_cast<int>(id / width_),
            exact_distance(probe, id)};
  }

  /// Linear (scanline) id of the best candidate.
  std::uint32_t query_id(std::span<const float> probe, QueryScratch& scratch) const {
    if (static_cast<int>(probe.size()) != vector_size())
      throw ContractError("query: probe length does not match index window");
    std::span<const float> key = probe;
    if (projection_) {
      scratch.projected.resize(search_dim_);
      project(probe, scratch.projected);
      key = scratch.projected;
    }
    const std::size_t k = projection_ ? static_cast<std::size_t>(options_.rerank) : 1;
    scratch.best.reset(k);
    if (options_.mode == SearchMode::Tree) {
      tree_.knn(key, scratch.best, projection_ ? options_.approx_eps : 0.0);
    } else {
      for (std::size_t i = 0; i < unique_ids_.size(); ++i) {
        const float* p = search_points_.data() + i * search_dim_;
        double d = 0.0;
        for (int j = 0; j < search_dim_; ++j) {
          const double diff = static_cast<double>(key[j]) - p[j];
          d += diff * diff;
        }
        scratch.best.offer({d, static_cast<std::uint32_t>(i)});
      }
    }
    const auto items = scratch.best.items();
    if (k == 1 || items.size() == 1)
      return unique_ids_[items.front().id];
    Neighbor winner;
    for (const auto& c : items) {
      const auto id = unique_ids_[c.id];
      const Neighbor exact{exact_distance(probe, id), id};
      if (exact < winner)
        winner = exact;
    }
    return winner.id;
  }

  double exact_distance(std::span<const float> probe, std::size_t id) const {
    const auto c = candidate(id);
    double d = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      const double diff = static_cast<double>(probe[j]) - c[j];
      d += diff * diff;
    }
    return d;
  }

  void project(std::span<const float> v, std::span<float> out) const {
    const int full = vector_size();
    Eigen::Map<const Eigen::VectorXf> x(v.data(), full);
    Eigen::Map<Eigen::VectorXf> y(out.data(), search_dim_);
    y.noalias() = *projection_ * (x - mean_);
  }

private:
  void fit_projection(std::size_t n, int full) {
    Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
        candidates_.data(), static_cast<Eigen::Index>(n), full);
    const Eigen::VectorXd mean = X.cast<double>().colwise().mean().transpose();
    const Eigen::MatrixXd centered = X.cast<double>().rowwise() - mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    // Eigenvalues ascend; take the trailing columns in reverse.
    Eigen::MatrixXf basis(search_dim_, full);
    for (int r = 0; r < search_dim_; ++r)
      basis.row(r) = eig.eigenvectors().col(full - 1 - r).transpose().cast<float>();
    projection_ = std::move(basis);
    mean_ = mean.cast<float>();
    search_points_.resize(unique_ids_.size() * search_dim_);
    for (std::size_t i = 0; i < unique_ids_.size(); ++i)
      project(candidate(unique_ids_[i]),
              std::span<float>(search_points_).subspan(i * search_dim_, search_dim_));
  }

  // Identical neighborhoods always tie, and the lowest id wins, so only the
  // first occurrence of each distinct vector needs to be searched.
  void collect_unique(std::size_t n) {
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets;
    unique_ids_.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = candidate(i);
      std::uint64_t h = 1469598103934665603ull;
      for (float f : v) {
        h ^= std::bit_cast<std::uint32_t>(f);
        h *= 1099511628211ull;
      }
      auto& bucket = buckets[h];
      const bool dup = std::any_of(bucket.begin(), bucket.end(), [&](std::uint32_t j) {
        return std::equal(v.begin(), v.end(), candidate(j).begin());
      });
      if (!dup) {
        bucket.push_back(static_cast<std::uint32_t>(i));
        unique_ids_.push_back(static_cast<std::uint32_t>(i));
      }
    }
  }

  int window_;
  int width_;
  int height_;
  IndexOptions options_;
  int search_dim_ = 0;
  std::vector<float> candidates_;
  std::vector<float> centers_;
  std::optional<Eigen::MatrixXf> projection_;
  Eigen::VectorXf mean_;
  std::vector<std::uint32_t> unique_ids_;  ///< ascending
  std::vector<float> search_points_;       ///< per unique id, projected when PCA is on
  KdTree tree_;
};

inline NeighborIndex build_index(const Image2D& exemplar, int window, PcaDims pca_dims,
                                 IndexOptions options = {}) {
  options.pca_dims = pca_dims;
  return NeighborIndex(exemplar, window, options);
}

} // namespace solidtex
