#pragma once

#include <chrono>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "config.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "mrf_synth.hpp"

namespace solidtex {

enum class Command { Synth, Eval, Compare, Slice };

inline std::optional<Command> parse_command(std::string_view name) {
  if (name == "synth") return Command::Synth;
  if (name == "eval") return Command::Eval;
  if (name == "compare") return Command::Compare;
  if (name == "slice") return Command::Slice;
  return std::nullopt;
}

inline const char* command_name(Command c) {
  switch (c) {
  case Command::Synth: return "synth";
  case Command::Eval: return "eval";
  case Command::Compare: return "compare";
  case Command::Slice: return "slice";
  }
  return "?";
}

namespace detail {

inline const std::filesystem::path& require(const std::optional<std::filesystem::path>& p,
                                            const char* key, Command c) {
  if (!p)
    throw ConfigError(std::string(command_name(c)) + " requires '" + key + "'");
  return *p;
}

class CsvWriter {
public:
  explicit CsvWriter(std::initializer_list<std::string_view> header) {
    bool first = true;
    for (auto h : header) {
      if (!first)
        os_ << ',';
      os_ << h;
      first = false;
    }
    os_ << '\n';
  }

  void row(std::string_view metric, std::initializer_list<double> values, std::string_view params = {}) {
    os_ << metric;
    for (double v : values)
      os_ << ',' << format_double(v);
    if (!params.empty())
      os_ << ',' << params;
    os_ << '\n';
  }

  std::string str() const { return os_.str(); }

private:
  std::ostringstream os_;
};

inline std::string glcm_params(const RunConfig& c, std::optional<int> sections) {
  std::string angles;
  for (std::size_t i = 0; i < c.glcm.angles.size(); ++i)
    angles += (i ? "/" : "") + std::to_string(c.glcm.angles[i]);
  std::string p = "offset=" + std::to_string(c.glcm.offset) + ";angles=" + angles +
                  ";levels=" + std::to_string(c.glcm.levels);
  if (sections)
    p += ";sections=" + std::to_string(*sections);
  return p;
}

inline std::string bin_params(const PsdReport& r, std::size_t i) {
  return "lo_um=" + format_double(r.bin_edges[i]) + ";hi_um=" + format_double(r.bin_edges[i + 1]);
}

inline void emit(const RunConfig& c, const std::string& text, std::ostream& out) {
  if (c.output)
    write_atomically(*c.output, [&](const std::filesystem::path& tmp) {
      write_bytes(tmp, std::vector<std::uint8_t>(text.begin(), text.end()));
    });
  else
    out << text;
}

} // namespace detail

/// CSV report (metric,value,params) for a volume file or a 2D image.
inline std::string eval_report(const RunConfig& c) {
  const auto& path = detail::require(c.input, "input", Command::Eval);
  detail::CsvWriter csv{"metric", "value", "params"};
  const std::uint64_t seed = c.synthesis.seed;

  auto porosity_rows = [&](const auto& data) {
    const auto hist = GrayHistogram::of(data);
    const int t = c.pore_threshold ? *c.pore_threshold : overflow_threshold(hist);
    csv.row("pore_threshold", {static_cast<double>(t)}, c.pore_threshold ? "method=fixed" : "method=overflow");
    csv.row("porosity", {porosity(data, t)}, "threshold=" + std::to_string(t));
  };
  auto psd_rows = [&](const PsdReport& r) {
    csv.row("particle_threshold", {r.threshold ? static_cast<double>(*r.threshold) : -1.0},
            c.particle_threshold ? "method=fixed" : "method=otsu");
    csv.row("psd_particles", {static_cast<double>(r.n_particles)}, "sections=" + std::to_string(r.n_sections));
    csv.row("psd_mean_ecd_um", {r.mean_diameter()});
    for (std::size_t i = 0; i < r.frequencies.size(); ++i)
      csv.row("psd_bin_" + std::to_string(i), {r.frequencies[i]}, detail::bin_params(r, i));
  };

  if (is_volume_file(path)) {
    const auto v = read_volume(path);
    const double px = v.voxel_size.value_or(c.pixel_size);
    if (c.wants(Metric::Porosity))
      porosity_rows(v);
    if (c.wants(Metric::Psd))
      psd_rows(psd(v, c.sections, seed, px,
                   c.particle_threshold ? c.particle_threshold : particle_threshold(GrayHistogram::of(v)),
                   c.psd_bins));
    if (c.wants(Metric::Glcm)) {
      const auto g = glcm_features(v, c.sections, seed, c.glcm);
      csv.row("glcm_contrast", {g.contrast}, detail::glcm_params(c, c.sections));
      csv.row("glcm_homogeneity", {g.homogeneity}, detail::glcm_params(c, c.sections));
    }
  } else {
    const auto img = read_exemplar(path, c.pixel_size);
    if (c.wants(Metric::Porosity))
      porosity_rows(img);
    if (c.wants(Metric::Psd)) {
      const auto k = c.particle_threshold ? c.particle_threshold : particle_threshold(GrayHistogram::of(img));
      psd_rows(psd_of_images(std::span<const Image2D>(&img, 1), k, c.pixel_size, c.psd_bins));
    }
    if (c.wants(Metric::Glcm)) {
      const auto g = glcm_features(img, c.glcm);
      csv.row("glcm_contrast", {g.contrast}, detail::glcm_params(c, std::nullopt));
      csv.row("glcm_homogeneity", {g.homogeneity}, detail::glcm_params(c, std::nullopt));
    }
  }
  return csv.str();
}

/// Side-by-side exemplar vs volume report (metric,exemplar,volume,delta).
/// Pore and particle thresholds are taken from the exemplar and applied to
/// both, so deltas reflect structure rather than threshold drift.
inline std::string compare_report(const RunConfig& c) {
  const auto ex = read_exemplar(detail::require(c.exemplar, "exemplar", Command::Compare), c.pixel_size);
  const auto v = read_volume(detail::require(c.volume, "volume", Command::Compare));
  const double px = c.pixel_size;
  const std::uint64_t seed = c.synthesis.seed;
  detail::CsvWriter csv{"metric", "exemplar", "volume", "delta"};
  auto row = [&](std::string_view m, double a, double b) { csv.row(m, {a, b, b - a}); };

  const auto ex_hist = GrayHistogram::of(ex);
  if (c.wants(Metric::Porosity)) {
    const int t = c.pore_threshold ? *c.pore_threshold : overflow_threshold(ex_hist);
    row("pore_threshold", t, t);
    row("porosity", porosity(ex, t), porosity(v, t));
  }
  if (c.wants(Metric::Psd)) {
    const auto k = c.particle_threshold ? c.particle_threshold : particle_threshold(ex_hist);
    const auto a = psd_of_images(std::span<const Image2D>(&ex, 1), k, px, c.psd_bins);
    const auto b = psd(v, c.sections, seed, px, k, c.psd_bins);
    const double kk = k ? *k : -1.0;
    row("particle_threshold", kk, kk);
    row("psd_particles", a.n_particles, b.n_particles);
    row("psd_mean_ecd_um", a.mean_diameter(), b.mean_diameter());
    for (std::size_t i = 0; i < a.frequencies.size(); ++i)
      row("psd_bin_" + std::to_string(i), a.frequencies[i], b.frequencies[i]);
  }
  if (c.wants(Metric::Glcm)) {
    const auto a = glcm_features(ex, c.glcm);
    const auto b = glcm_features(v, c.sections, seed, c.glcm);
    row("glcm_contrast", a.contrast, b.contrast);
    row("glcm_homogeneity", a.homogeneity, b.homogeneity);
  }
  return csv.str();
}

inline int exit_code(ErrorCategory c) { return static_cast<int>(c); }

/// Runs one subcommand; returns the process exit status. Reports go to the
/// configured output or `out`; the resolved config and diagnostics go to `log`.
inline int run(Command command, RunConfig config, std::ostream& out, std::ostream& log) {
  auto fail = [&](const char* category, int code, const std::string& message) {
    log << "error: category=" << category << " message=" << message << "\n";
    return code;
  };
  try {
    config.validate();
    log << "# solidtex " << command_name(command) << " seed=" << config.synthesis.seed << "\n";
    {
      std::istringstream lines(config.to_text());
      for (std::string line; std::getline(lines, line);)
        log << "#   " << line << "\n";
    }
    switch (command) {
    case Command::Synth: {
      const auto& ex_path = detail::require(config.exemplar, "exemplar", command);
      const auto& out_path = detail::require(config.output, "output", command);
      const auto ex = read_exemplar(ex_path, config.pixel_size);
      const auto start = std::chrono::steady_clock::now();
      int last_level = -1;
      const auto volume = synthesize(ex, config.synthesis, [&](const IterationReport& r) {
        if (r.level != last_level) {
          log << "# level " << r.level << " dims " << r.dims.nx << "x" << r.dims.ny << "x" << r.dims.nz << "\n";
          last_level = r.level;
        }
      });
      write_volume(volume, out_path);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      log << "# wrote " << out_path.string() << " in " << std::fixed << std::setprecision(1) << secs << " s\n";
      break;
    }
    case Command::Eval:
      detail::emit(config, eval_report(config), out);
      break;
    case Command::Compare:
      detail::emit(config, compare_report(config), out);
      break;
    case Command::Slice: {
      const auto v = read_volume(detail::require(config.volume, "volume", command));
      const auto files = export_slices(v, detail::require(config.output, "output", command));
      log << "# wrote " << files.size() << " slices to " << config.output->string() << "\n";
      break;
    }
    }
    return 0;
  } catch (const Error& e) {
    return fail(e.category_name(), exit_code(e.category()), e.what());
  } catch (const BoundsError& e) {
    return fail("numeric", exit_code(ErrorCategory::Numeric), e.what());
  } catch (const ContractError& e) {
    return fail("config", exit_code(ErrorCategory::Config), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("io", exit_code(ErrorCategory::Io), e.what());
  } catch (const std::exception& e) {
    return fail("internal", 1, e.what());
  }
}

} // namespace solidtex
