#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace solidtex {

/// Single-channel raster. Values are 8-bit gray levels held as float so that
/// the optimizer can average without quantizing; row-major, x fastest.
class Image2D {
public:
  Image2D() = default;

  Image2D(int width, int height, float fill = 0.0f)
      : width_(width), height_(height) {
    if (width < 1 || height < 1)
      throw ContractError("Image2D: dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  Image2D(int width, int height, std::vector<float> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1)
      throw ContractError("Image2D: dimensions must be positive");
    if (data_.size() != static_cast<std::size_t>(width) * height)
      throw ContractError("Image2D: data length must equal width * height");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  float operator()(int x, int y) const noexcept { return data_[index(x, y)]; }
  float& operator()(int x, int y) noexcept { return data_[index(x, y)]; }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  std::optional<double> pixel_size; ///< micrometers per pixel

  friend bool operator==(const Image2D& a, const Image2D& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

enum class Axis { X = 0, Y = 1, Z = 2 };

inline constexpr std::array<Axis, 3> kAxes{Axis::X, Axis::Y, Axis::Z};

inline const char* axis_name(Axis a) {
  switch (a) {
  case Axis::X: return "X";
  case Axis::Y: return "Y";
  case Axis::Z: return "Z";
  }
  return "?";
}

struct Dims3 {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  int operator[](Axis a) const noexcept {
    return a == Axis::X ? nx : (a == Axis::Y ? ny : nz);
  }
  std::size_t count() const noexcept {
    return static_cast<std::size_t>(nx) * ny * nz;
  }
  friend bool operator==(const Dims3&, const Dims3&) = default;
};

/// Single-channel voxel grid, x fastest then y then z.
class Volume3D {
public:
  Volume3D() = default;

  Volume3D(Dims3 dims, float fill = 0.0f) : dims_(dims) {
    if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1)
      throw ContractError("Volume3D: dimensions must be positive");
    data_.assign(dims.count(), fill);
  }

  Volume3D(Dims3 dims, std::vector<float> data) : dims_(dims), data_(std::move(data)) {
    if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1)
      throw ContractError("Volume3D: dimensions must be positive");
    if (data_.size() != dims.count())
      throw ContractError("Volume3D: data length must equal nx * ny * nz");
  }

  const Dims3& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(int x, int y, int z) const noexcept {
    return (static_cast<std::size_t>(z) * dims_.ny + y) * dims_.nx + x;
  }

  float operator()(int x, int y, int z) const noexcept { return data_[index(x, y, z)]; }
  float& operator()(int x, int y, int z) noexcept { return data_[index(x, y, z)]; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  std::optional<double> voxel_size; ///< micrometers per voxel

  friend bool operator==(const Volume3D& a, const Volume3D& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

private:
  Dims3 dims_;
  std::vector<float> data_;
};

/// In-slice coordinate frame of the cross-section perpendicular to an axis.
///   Z: u = x, v = y  (image nx wide, ny tall)
///   Y: u = x, v = z  (image nx wide, nz tall)
///   X: u = y, v = z  (image ny wide, nz tall)
struct SliceFrame {
  int width;
  int height;

  static SliceFrame of(const Dims3& d, Axis axis) {
    switch (axis) {
    case Axis::X: return {d.ny, d.nz};
    case Axis::Y: return {d.nx, d.nz};
    case Axis::Z: return {d.nx, d.ny};
    }
    return {0, 0};
  }
};

/// Maps in-slice (u, v) at position `index` along `axis` to voxel (x, y, z).
inline std::array<int, 3> slice_to_voxel(Axis axis, int index, int u, int v) {
  switch (axis) {
  case Axis::X: return {index, u, v};
  case Axis::Y: return {u, index, v};
  case Axis::Z: return {u, v, index};
  }
  return {0, 0, 0};
}

inline Image2D slice_extract(const Volume3D& volume, Axis axis, int index) {
  const auto& d = volume.dims();
  if (index < 0 || index >= d[axis])
    throw BoundsError("slice_extract: index " + std::to_string(index) + " outside axis " +
                      axis_name(axis) + " of extent " + std::to_string(d[axis]));
  const auto frame = SliceFrame::of(d, axis);
  Image2D out(frame.width, frame.height);
  for (int v = 0; v < frame.height; ++v)
    for (int u = 0; u < frame.width; ++u) {
      const auto p = slice_to_voxel(axis, index, u, v);
      out(u, v) = volume(p[0], p[1], p[2]);
    }
  if (volume.voxel_size)
    out.pixel_size = volume.voxel_size;
  return out;
}

/// Stacks Z-slices (each nx wide, ny tall) back into a volume.
inline Volume3D assemble_z_slices(std::span<const Image2D> slices) {
  if (slices.empty())
    throw ContractError("assemble_z_slices: no slices");
  const int nx = slices.front().width();
  const int ny = slices.front().height();
  Volume3D out({nx, ny, static_cast<int>(slices.size())});
  for (int z = 0; z < static_cast<int>(slices.size()); ++z) {
    const auto& s = slices[z];
    if (s.width() != nx || s.height() != ny)
      throw ContractError("assemble_z_slices: slice dimensions differ");
    std::copy(s.data().begin(), s.data().end(), out.data().begin() + out.index(0, 0, z));
  }
  return out;
}

enum class Wrap { Toroidal, Clamp };

/// Resolves a coordinate against an extent of n under the given wrap mode.
inline int wrap_coord(int c, int n, Wrap wrap) noexcept {
  if (wrap == Wrap::Toroidal) {
    c %= n;
    return c < 0 ? c + n : c;
  }
  return std::clamp(c, 0, n - 1);
}

struct NeighborhoodVector {
  int window = 0;
  std::vector<float> values; ///< window * window, scanline order
  int cx = 0;
  int cy = 0;
};

/// First patch offset relative to the center; even windows put the center at
/// offset floor(w/2) within the patch.
inline constexpr int window_origin(int window) noexcept { return -(window / 2); }

inline NeighborhoodVector neighborhood_extract(const Image2D& image, int cx, int cy, int window,
                                               Wrap wrap = Wrap::Toroidal) {
  if (window < 1)
    throw ContractError("neighborhood_extract: window must be >= 1");
  if (!image.contains(cx, cy))
    throw BoundsError("neighborhood_extract: center (" + std::to_string(cx) + ", " +
                      std::to_string(cy) + ") outside image");
  NeighborhoodVector out{window, std::vector<float>(static_cast<std::size_t>(window) * window), cx, cy};
  const int o = window_origin(window);
  std::size_t k = 0;
  for (int dy = 0; dy < window; ++dy) {
    const int y = wrap_coord(cy + o + dy, image.height(), wrap);
    for (int dx = 0; dx < window; ++dx) {
      const int x = wrap_coord(cx + o + dx, image.width(), wrap);
      out.values[k++] = image(x, y);
    }
  }
  return out;
}

/// Neighborhood of voxel (x, y, z) inside the cross-section perpendicular to
/// `axis`, with toroidal wrap on the volume. Equivalent to slice_extract
/// followed by neighborhood_extract, without materializing the slice.
inline void volume_neighborhood(const Volume3D& volume, Axis axis, int x, int y, int z, int window,
                                std::span<float> out) {
  const auto& d = volume.dims();
  const auto frame = SliceFrame::of(d, axis);
  int index = 0, cu = 0, cv = 0;
  switch (axis) {
  case Axis::X: index = x; cu = y; cv = z; break;
  case Axis::Y: index = y; cu = x; cv = z; break;
  case Axis::Z: index = z; cu = x; cv = y; break;
  }
  const int o = window_origin(window);
  std::size_t k = 0;
  for (int dv = 0; dv < window; ++dv) {
    const int v = wrap_coord(cv + o + dv, frame.height, Wrap::Toroidal);
    for (int du = 0; du < window; ++du) {
      const int u = wrap_coord(cu + o + du, frame.width, Wrap::Toroidal);
      const auto p = slice_to_voxel(axis, index, u, v);
      out[k++] = volume(p[0], p[1], p[2]);
    }
  }
}

template <typename Raster>
std::pair<float, float> value_range(const Raster& r) {
  const auto [lo, hi] = std::minmax_element(r.data().begin(), r.data().end());
  return {*lo, *hi};
}

} // namespace solidtex
