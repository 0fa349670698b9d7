#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "metrics.hpp"
#include "mrf_synth.hpp"

namespace solidtex {

enum class Metric { Porosity, Psd, Glcm };

/// Everything a CLI run needs: synthesis parameters, paths, metric options.
///
/// Text format: one `key = value` per line, `#` starts a comment, blank lines
/// ignored. Lists are comma separated. Keys:
///
///   key                   default        meaning
///   exemplar              -              2D exemplar (PNG/PGM)
///   volume                -              volume file (compare, slice)
///   input                 -              volume or image to evaluate (eval)
///   output                -              output file or directory
///   pixel_size            1.0            micrometers per exemplar pixel
///   pyramid_levels        3              pyramid depth
///   window_per_level      6,8,8          neighborhood side per level
///   iterations_per_level  20,20,30       search/optimize rounds per level
///   level_order           finest_first   order of the two lists above
///   weight_exponent       0.8            robust weight exponent r
///   histogram_weight      1.0            strength of histogram penalties and matching
///   update_footprint      center         center | overlap (see UpdateFootprint)
///   pca_dims              8              search-space dims, or `full`
///   rerank                4              projected candidates re-ranked exactly
///   search_eps            1.0            approximation of the projected tree search, 0 = exact
///   search                tree           tree | exhaustive
///   exemplar_wrap         toroidal       toroidal | clamp
///   seed                  0              random seed
///   output_dims           64,64,64       synthesized volume size
///   threads               0              worker threads, 0 = default
///   metrics               porosity,psd,glcm
///   pore_threshold        auto           overflow point, or a gray level
///   particle_threshold    auto           Otsu, or a gray level
///   sections              30             random cross-sections per volume
///   glcm_offset           1
///   glcm_angles           0,90
///   glcm_levels           256
///   psd_bins              20             log bins between psd_min_um and psd_max_um
///   psd_min_um            1
///   psd_max_um            100
struct RunConfig {
  SynthesisParams synthesis;
  std::optional<std::filesystem::path> exemplar;
  std::optional<std::filesystem::path> volume;
  std::optional<std::filesystem::path> input;
  std::optional<std::filesystem::path> output;
  double pixel_size = 1.0;
  bool coarsest_first = false;
  std::vector<Metric> metrics{Metric::Porosity, Metric::Psd, Metric::Glcm};
  std::optional<int> pore_threshold;
  std::optional<int> particle_threshold;
  int sections = 30;
  GlcmOptions glcm;
  PsdBins psd_bins;

  bool wants(Metric m) const {
    return std::find(metrics.begin(), metrics.end(), m) != metrics.end();
  }

  void validate() const {
    synthesis.validate();
    if (!(pixel_size > 0.0))
      throw ConfigError("pixel_size must be positive");
    if (sections < 1)
      throw ConfigError("sections must be >= 1");
    if (glcm.offset < 1)
      throw ConfigError("glcm_offset must be >= 1");
    if (glcm.levels < 2 || glcm.levels > 256)
      throw ConfigError("glcm_levels must be in [2, 256]");
    if (glcm.angles.empty())
      throw ConfigError("glcm_angles must not be empty");
    for (int a : glcm.angles)
      if (a != 0 && a != 45 && a != 90 && a != 135)
        throw ConfigError("glcm_angles must be drawn from 0, 45, 90, 135");
    if (psd_bins.count < 1 || !(psd_bins.min_um > 0.0) || !(psd_bins.max_um > psd_bins.min_um))
      throw ConfigError("psd bins need count >= 1 and 0 < psd_min_um < psd_max_um");
    for (auto t : {pore_threshold, particle_threshold})
      if (t && (*t < 0 || *t > 256))
        throw ConfigError("thresholds must be gray levels in [0, 256]");
  }

  /// Resolved configuration in the same text format.
  std::string to_text() const;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(trim(item));
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* b = value.data();
  const char* e = b + value.size();
  const auto r = std::from_chars(b, e, out);
  if (r.ec != std::errc() || r.ptr != e)
    throw ConfigError("key '" + key + "': cannot parse '" + value + "' as a number");
  return out;
}

template <typename T>
std::vector<T> parse_number_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  for (const auto& item : split_list(value))
    out.push_back(parse_number<T>(key, item));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i)
      s += ",";
    if constexpr (std::is_arithmetic_v<T>)
      s += std::to_string(v[i]);
    else
      s += v[i];
  }
  return s;
}

inline std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".eEn") == std::string::npos)
    s += ".0";
  return s;
}

inline const char* metric_name(Metric m) {
  switch (m) {
  case Metric::Porosity: return "porosity";
  case Metric::Psd: return "psd";
  case Metric::Glcm: return "glcm";
  }
  return "?";
}

} // namespace detail

inline RunConfig parse_config(std::istream& in, const std::string& source = "config") {
  RunConfig c;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  std::optional<std::vector<int>> windows, iterations;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    const auto text = detail::trim(line);
    if (text.empty())
      continue;
    const auto eq = text.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected 'key = value'");
    const auto key = detail::trim(text.substr(0, eq));
    const auto value = detail::trim(text.substr(eq + 1));
    if (!seen.insert(key).second)
      throw ConfigError(where + ": duplicate key '" + key + "'");
    if (value.empty())
      throw ConfigError(where + ": empty value for '" + key + "'");
    using detail::parse_number;
    using detail::parse_number_list;
    auto& s = c.synthesis;
    auto choose = [&](std::initializer_list<const char*> options) {
      for (const char* o : options)
        if (value == o)
          return std::string(o);
      throw ConfigError(where + ": invalid value '" + value + "' for '" + key + "'");
    };
    auto level = [&](const std::string& v) -> std::optional<int> {
      if (v == "auto")
        return std::nullopt;
      return parse_number<int>(key, v);
    };

    if (key == "exemplar") c.exemplar = value;
    else if (key == "volume") c.volume = value;
    else if (key == "input") c.input = value;
    else if (key == "output") c.output = value;
    else if (key == "pixel_size") c.pixel_size = parse_number<double>(key, value);
    else if (key == "pyramid_levels") s.pyramid_levels = parse_number<int>(key, value);
    else if (key == "window_per_level") windows = parse_number_list<int>(key, value);
    else if (key == "iterations_per_level") iterations = parse_number_list<int>(key, value);
    else if (key == "level_order") c.coarsest_first = choose({"finest_first", "coarsest_first"}) == "coarsest_first";
    else if (key == "weight_exponent") s.weight_exponent = parse_number<double>(key, value);
    else if (key == "histogram_weight") s.histogram_weight = parse_number<double>(key, value);
    else if (key == "update_footprint") s.footprint = choose({"center", "overlap"}) == "center" ? UpdateFootprint::Center : UpdateFootprint::Overlap;
    else if (key == "pca_dims") {
      if (value == "full") {
        s.pca_dims = PcaDims::full();
      } else {
        const int d = parse_number<int>(key, value);
        if (d < 1)
          throw ConfigError(where + ": pca_dims must be >= 1 or 'full'");
        s.pca_dims = PcaDims(d);
      }
    }
    else if (key == "rerank") s.rerank = parse_number<int>(key, value);
    else if (key == "search_eps") s.search_eps = parse_number<double>(key, value);
    else if (key == "search") s.search_mode = choose({"tree", "exhaustive"}) == "tree" ? SearchMode::Tree : SearchMode::Exhaustive;
    else if (key == "exemplar_wrap") s.exemplar_wrap = choose({"toroidal", "clamp"}) == "toroidal" ? Wrap::Toroidal : Wrap::Clamp;
    else if (key == "seed") s.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "output_dims") {
      const auto d = parse_number_list<int>(key, value);
      if (d.size() != 3)
        throw ConfigError(where + ": output_dims needs three values nx,ny,nz");
      s.output_dims = {d[0], d[1], d[2]};
    }
    else if (key == "threads") s.threads = parse_number<int>(key, value);
    else if (key == "metrics") {
      c.metrics.clear();
      for (const auto& m : detail::split_list(value)) {
        if (m == "porosity") c.metrics.push_back(Metric::Porosity);
        else if (m == "psd") c.metrics.push_back(Metric::Psd);
        else if (m == "glcm") c.metrics.push_back(Metric::Glcm);
        else throw ConfigError(where + ": unknown metric '" + m + "'");
      }
    }
    else if (key == "pore_threshold") c.pore_threshold = level(value);
    else if (key == "particle_threshold") c.particle_threshold = level(value);
    else if (key == "sections") c.sections = parse_number<int>(key, value);
    else if (key == "glcm_offset") c.glcm.offset = parse_number<int>(key, value);
    else if (key == "glcm_angles") c.glcm.angles = parse_number_list<int>(key, value);
    else if (key == "glcm_levels") c.glcm.levels = parse_number<int>(key, value);
    else if (key == "psd_bins") c.psd_bins.count = parse_number<int>(key, value);
    else if (key == "psd_min_um") c.psd_bins.min_um = parse_number<double>(key, value);
    else if (key == "psd_max_um") c.psd_bins.max_um = parse_number<double>(key, value);
    else throw ConfigError(where + ": unknown key '" + key + "'");
  }
  auto& s = c.synthesis;
  if (windows)
    s.window_per_level = *windows;
  if (iterations)
    s.iterations_per_level = *iterations;
  if (c.coarsest_first) {
    std::reverse(s.window_per_level.begin(), s.window_per_level.end());
    std::reverse(s.iterations_per_level.begin(), s.iterations_per_level.end());
    c.coarsest_first = false;
  }
  c.validate();
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot read config '" + path.string() + "'");
  return parse_config(in, path.string());
}

inline std::string RunConfig::to_text() const {
  std::ostringstream o;
  const auto& s = synthesis;
  auto opt_path = [&](const char* k, const std::optional<std::filesystem::path>& p) {
    if (p)
      o << k << " = " << p->string() << "\n";
  };
  opt_path("exemplar", exemplar);
  opt_path("volume", volume);
  opt_path("input", input);
  opt_path("output", output);
  o << "pixel_size = " << detail::format_double(pixel_size) << "\n"
    << "pyramid_levels = " << s.pyramid_levels << "\n"
    << "window_per_level = " << detail::join(s.window_per_level) << "\n"
    << "iterations_per_level = " << detail::join(s.iterations_per_level) << "\n"
    << "level_order = finest_first\n"
    << "weight_exponent = " << detail::format_double(s.weight_exponent) << "\n"
    << "histogram_weight = " << detail::format_double(s.histogram_weight) << "\n"
    << "update_footprint = " << (s.footprint == UpdateFootprint::Center ? "center" : "overlap") << "\n"
    << "pca_dims = " << (s.pca_dims.is_full() ? std::string("full") : std::to_string(s.pca_dims.value())) << "\n"
    << "rerank = " << s.rerank << "\n"
    << "search_eps = " << detail::format_double(s.search_eps) << "\n"
    << "search = " << (s.search_mode == SearchMode::Tree ? "tree" : "exhaustive") << "\n"
    << "exemplar_wrap = " << (s.exemplar_wrap == Wrap::Toroidal ? "toroidal" : "clamp") << "\n"
    << "seed = " << s.seed << "\n"
    << "output_dims = " << s.output_dims.nx << "," << s.output_dims.ny << "," << s.output_dims.nz << "\n"
    << "threads = " << s.threads << "\n";
  std::vector<std::string> names;
  for (auto m : metrics)
    names.push_back(detail::metric_name(m));
  o << "metrics = " << detail::join(names) << "\n"
    << "pore_threshold = " << (pore_threshold ? std::to_string(*pore_threshold) : "auto") << "\n"
    << "particle_threshold = " << (particle_threshold ? std::to_string(*particle_threshold) : "auto") << "\n"
    << "sections = " << sections << "\n"
    << "glcm_offset = " << glcm.offset << "\n"
    << "glcm_angles = " << detail::join(glcm.angles) << "\n"
    << "glcm_levels = " << glcm.levels << "\n"
    << "psd_bins = " << psd_bins.count << "\n"
    << "psd_min_um = " << detail::format_double(psd_bins.min_um) << "\n"
    << "psd_max_um = " << detail::format_double(psd_bins.max_um) << "\n";
  return o.str();
}

} // namespace solidtex
