#pragma once

#include <png.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "grid.hpp"

namespace solidtex {

namespace fs = std::filesystem;

namespace detail {

inline std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0f, 255.0f));
}

/// Writes through a sibling temporary file and renames it into place, so a
/// failed write never leaves a partial file at `path`.
template <typename Writer>
void write_atomically(const fs::path& path, Writer&& write) {
  const auto parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::random_device rd;
  const auto tmp = parent / ("." + path.filename().string() + ".tmp" + std::to_string(rd()));
  try {
    write(tmp);
    fs::rename(tmp, path);
  } catch (const fs::filesystem_error& e) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw IoError("cannot write '" + path.string() + "': " + e.code().message());
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

inline void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing: " + std::strerror(errno));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw IoError("short write to '" + path.string() + "'");
}

struct PngReadCtx {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos = 8;
};

[[noreturn]] inline void png_fail(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
  if (buf)
    *buf = msg;
  png_longjmp(png, 1);
}

inline void png_warn(png_structp, png_const_charp) {}

inline Image2D decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("'" + name + "': libpng initialization failed");
  }
  PngReadCtx ctx{&bytes};
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 w = 0, h = 0;
  int channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("'" + name + "': invalid PNG (" + err + ")");
  }
  png_set_read_fn(png, &ctx, [](png_structp p, png_bytep out, png_size_t n) {
    auto* c = static_cast<PngReadCtx*>(png_get_io_ptr(p));
    if (c->pos + n > c->bytes->size())
      png_error(p, "truncated data");
    std::memcpy(out, c->bytes->data() + c->pos, n);
    c->pos += n;
  });
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE)
    png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16)
    png_set_scale_16(png);
  if (color & PNG_COLOR_MASK_ALPHA)
    png_set_strip_alpha(png);
  png_read_update_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  channels = png_get_channels(png, info);
  const auto stride = png_get_rowbytes(png, info);
  pixels.resize(stride * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image2D img(static_cast<int>(w), static_cast<int>(h));
  for (png_uint_32 y = 0; y < h; ++y)
    for (png_uint_32 x = 0; x < w; ++x) {
      const std::uint8_t* px = rows[y] + static_cast<std::size_t>(x) * channels;
      if (channels == 1) {
        img(x, y) = px[0];
      } else {
        // Mean of the color channels; equal channels decode like grayscale.
        const int n = channels >= 3 ? 3 : 1;
        int s = 0;
        for (int c = 0; c < n; ++c)
          s += px[c];
        img(x, y) = std::nearbyint(static_cast<float>(s) / n);
      }
    }
  return img;
}

inline Image2D decode_pgm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) -> Image2D {
    throw IoError("'" + name + "': invalid PGM (" + why + ")");
  };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> long {
    skip_space();
    long v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      any = true;
      if (v > 1L << 30)
        fail("number too large");
    }
    if (!any)
      fail("expected a number");
    return v;
  };
  const bool binary = bytes[1] == '5';
  pos = 2;
  const long w = number(), h = number(), maxval = number();
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
    return fail("bad header");
  Image2D img(static_cast<int>(w), static_cast<int>(h));
  const std::size_t n = static_cast<std::size_t>(w) * h;
  auto scale = [&](long v) -> float {
    if (v > maxval)
      fail("sample exceeds maxval");
    return maxval == 255 ? static_cast<float>(v) : std::nearbyint(255.0f * v / maxval);
  };
  if (binary) {
    ++pos; // single whitespace after maxval
    const std::size_t bps = maxval < 256 ? 1 : 2;
    if (bytes.size() < pos + n * bps)
      return fail("truncated raster");
    for (std::size_t i = 0; i < n; ++i) {
      const long v = bps == 1 ? bytes[pos + i] : (bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1];
      img.data()[i] = scale(v);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      img.data()[i] = scale(number());
  }
  return img;
}

} // namespace detail

/// Decodes an 8-bit grayscale exemplar from PNG or PGM (P2/P5). Color inputs
/// are reduced to the mean of their channels.
inline Image2D read_exemplar(const fs::path& path, std::optional<double> pixel_size = std::nullopt) {
  if (!fs::exists(path))
    throw IoError("cannot read '" + path.string() + "': no such file");
  const auto bytes = detail::read_file(path);
  static constexpr std::array<std::uint8_t, 8> png_sig{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  Image2D img;
  if (bytes.size() >= 8 && std::equal(png_sig.begin(), png_sig.end(), bytes.begin()))
    img = detail::decode_png(bytes, path.string());
  else if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '5'))
    img = detail::decode_pgm(bytes, path.string());
  else
    throw IoError("cannot read '" + path.string() + "': unsupported format (expected PNG or PGM)");
  img.pixel_size = pixel_size;
  return img;
}

inline void write_png(const Image2D& image, const fs::path& path) {
  detail::write_atomically(path, [&](const fs::path& tmp) {
    FILE* fp = std::fopen(tmp.c_str(), "wb");
    if (!fp)
      throw IoError("cannot open '" + tmp.string() + "' for writing: " + std::strerror(errno));
    std::string err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_fail, detail::png_warn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    std::vector<std::uint8_t> row(image.width());
    if (!png || !info || setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      std::fclose(fp);
      throw IoError("cannot encode PNG '" + path.string() + "': " + err);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, image.width(), image.height(), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x)
        row[x] = detail::to_byte(image(x, y));
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fclose(fp) != 0)
      throw IoError("cannot write '" + path.string() + "'");
  });
}

/// Binary P5 PGM.
inline void write_pgm(const Image2D& image, const fs::path& path) {
  std::string header = "P5\n" + std::to_string(image.width()) + " " +
                       std::to_string(image.height()) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (float v : image.data())
    bytes.push_back(detail::to_byte(v));
  detail::write_atomically(path, [&](const fs::path& tmp) { detail::write_bytes(tmp, bytes); });
}

// --- VolumeFile -------------------------------------------------------------
//
//   offset  size  field
//   0       8     magic "SOLIDTEX"
//   8       2     version (u16 LE) = 1
//   10      12    nx, ny, nz (u32 LE)
//   22      4     voxel size in micrometers (f32 LE, 0 when unknown)
//   26      n     payload, one byte per voxel, x fastest

inline constexpr std::array<char, 8> kVolumeMagic{'S', 'O', 'L', 'I', 'D', 'T', 'E', 'X'};
inline constexpr std::uint16_t kVolumeVersion = 1;
inline constexpr std::size_t kVolumeHeaderSize = 26;

inline std::vector<std::uint8_t> encode_volume(const Volume3D& v) {
  std::vector<std::uint8_t> out;
  out.reserve(kVolumeHeaderSize + v.size());
  auto put = [&out](std::uint64_t value, int bytes) {
    for (int i = 0; i < bytes; ++i)
      out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  };
  out.insert(out.end(), kVolumeMagic.begin(), kVolumeMagic.end());
  put(kVolumeVersion, 2);
  put(static_cast<std::uint32_t>(v.dims().nx), 4);
  put(static_cast<std::uint32_t>(v.dims().ny), 4);
  put(static_cast<std::uint32_t>(v.dims().nz), 4);
  put(std::bit_cast<std::uint32_t>(static_cast<float>(v.voxel_size.value_or(0.0))), 4);
  for (float x : v.data())
    out.push_back(detail::to_byte(x));
  return out;
}

inline Volume3D decode_volume(const std::vector<std::uint8_t>& bytes, const std::string& name = "volume") {
  auto fail = [&](const std::string& why) -> Volume3D {
    throw FormatError("'" + name + "': " + why);
  };
  if (bytes.size() < kVolumeHeaderSize)
    return fail("truncated header");
  if (!std::equal(kVolumeMagic.begin(), kVolumeMagic.end(), bytes.begin()))
    return fail("bad magic (not a SOLIDTEX volume)");
  auto get = [&bytes](std::size_t at, int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
    return v;
  };
  if (get(8, 2) != kVolumeVersion)
    return fail("unsupported version " + std::to_string(get(8, 2)));
  const auto nx = get(10, 4), ny = get(14, 4), nz = get(18, 4);
  if (nx == 0 || ny == 0 || nz == 0 || nx > (1u << 20) || ny > (1u << 20) || nz > (1u << 20))
    return fail("invalid dimensions");
  const float vs = std::bit_cast<float>(static_cast<std::uint32_t>(get(22, 4)));
  const std::uint64_t n = nx * ny * nz;
  if (bytes.size() - kVolumeHeaderSize < n)
    return fail("truncated payload");
  if (bytes.size() - kVolumeHeaderSize > n)
    return fail("trailing bytes after payload");
  std::vector<float> data(bytes.begin() + kVolumeHeaderSize, bytes.end());
  Volume3D v({static_cast<int>(nx), static_cast<int>(ny), static_cast<int>(nz)}, std::move(data));
  if (vs > 0.0f && std::isfinite(vs))
    v.voxel_size = vs;
  return v;
}

inline void write_volume(const Volume3D& v, const fs::path& path) {
  const auto bytes = encode_volume(v);
  detail::write_atomically(path, [&](const fs::path& tmp) { detail::write_bytes(tmp, bytes); });
}

inline Volume3D read_volume(const fs::path& path) {
  return decode_volume(detail::read_file(path), path.string());
}

inline bool is_volume_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::array<char, 8> head{};
  return in.read(head.data(), head.size()) && head == kVolumeMagic;
}

/// Writes every Z-slice as <dir>/<prefix><zero-padded z>.png; returns the paths.
inline std::vector<fs::path> export_slices(const Volume3D& v, const fs::path& dir,
                                           const std::string& prefix = "slice_") {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  const int nz = v.dims().nz;
  const int digits = std::max(4, static_cast<int>(std::to_string(nz - 1).size()));
  std::vector<fs::path> out;
  for (int z = 0; z < nz; ++z) {
    std::string num = std::to_string(z);
    num.insert(0, digits - num.size(), '0');
    out.push_back(dir / (prefix + num + ".png"));
    write_png(slice_extract(v, Axis::Z, z), out.back());
  }
  return out;
}

} // namespace solidtex
