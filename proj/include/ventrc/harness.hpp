#pragma once

// Closed-loop ventilation experiments, per-breath error norms and reports.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ventrc/config.hpp"
#include "ventrc/control_rt.hpp"
#include "ventrc/errors.hpp"
#include "ventrc/io.hpp"
#include "ventrc/plant.hpp"
#include "ventrc/svg.hpp"

namespace ventrc {

enum class ControllerMode { Pid, PidRc };

inline ControllerMode parse_mode(const std::string& text) {
  if (text == "pid") return ControllerMode::Pid;
  if (text == "rc" || text == "pid+rc") return ControllerMode::PidRc;
  throw ConfigurationError("unknown controller mode '" + text + "' (expected pid or rc)");
}

inline std::string mode_name(ControllerMode m) { return m == ControllerMode::Pid ? "pid" : "rc"; }

struct ExperimentSpec {
  ScenarioConfig scenario;
  ControllerMode mode = ControllerMode::Pid;
  int breaths = 20;
  std::optional<RcFilterSet> filterset;
  std::uint64_t seed = 0;
  double measurement_noise_std = 0.0;  // mbar
  double integral_gain = kBenchmarkIntegralGain;
  std::optional<OutputLimits> output_limits;
  std::optional<double> reference_rise_time;  // s; default is a pure square wave
};

/// Per-sample record of one experiment. Breath j covers samples
/// [j N, (j + 1) N).
struct BreathLog {
  std::string label;
  int period_n = 0;
  double sample_time = 0.0;
  std::vector<double> reference;
  std::vector<double> measured_p_aw;
  std::vector<double> p_lung;
  std::vector<double> q_pat;
  std::vector<double> command;
  std::vector<double> breath_norms;  // sqrt(sum e^2) per complete breath, e = reference - measured_p_aw

  std::size_t samples() const { return reference.size(); }
  std::size_t breath_start(std::size_t breath) const { return breath * static_cast<std::size_t>(period_n); }
};

class ExperimentDiverged : public std::runtime_error {
 public:
  ExperimentDiverged(const std::string& what, BreathLog partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const BreathLog& partial_log() const { return partial_; }

 private:
  BreathLog partial_;
};

inline BreathLog run_experiment(const ExperimentSpec& spec) {
  if (spec.breaths < 1) throw ConfigurationError("experiment: breaths must be >= 1");
  const auto& circuit = spec.scenario.circuit;
  const double ts = circuit.sample_time;
  const auto reference = reference_profile(spec.scenario.patient, ts, spec.reference_rise_time);
  const int n = static_cast<int>(reference.size());

  ControllerConfig cc;
  cc.integral_gain = spec.integral_gain;
  cc.sample_time = ts;
  cc.output_limits = spec.output_limits;
  if (spec.mode == ControllerMode::PidRc) {
    if (!spec.filterset) throw ConfigurationError("experiment: rc mode needs a filter set");
    if (spec.filterset->period_n != n)
      throw ConfigurationError("experiment: filter set period N = " + std::to_string(spec.filterset->period_n) +
                               " differs from the scenario period " + std::to_string(n));
    cc.filterset = spec.filterset;
    cc.rc_enabled = true;
  }
  Controller controller(cc);
  PlantSimulator plant(circuit, spec.scenario.patient);
  if (!plant.strictly_proper()) throw ConfigurationError("experiment: the loop needs at least one sample of delay");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.measurement_noise_std);

  BreathLog log;
  log.label = spec.scenario.patient.name + "_" + mode_name(spec.mode);
  log.period_n = n;
  log.sample_time = ts;
  const std::size_t total = static_cast<std::size_t>(spec.breaths) * static_cast<std::size_t>(n);
  for (auto* v : {&log.reference, &log.measured_p_aw, &log.p_lung, &log.q_pat, &log.command}) v->reserve(total);

  double sum_sq = 0.0;
  for (std::size_t k = 0; k < total; ++k) {
    const double r = reference[k % static_cast<std::size_t>(n)];
    double y = plant.measured();
    if (spec.measurement_noise_std > 0.0) y += noise(rng);
    const double u = controller.step(r, y);
    const PlantSample s = plant.step(u);

    log.reference.push_back(r);
    log.measured_p_aw.push_back(y);
    log.p_lung.push_back(s.p_lung);
    log.q_pat.push_back(s.q_pat);
    log.command.push_back(u);
    const double e = r - y;
    sum_sq += e * e;
    if ((k + 1) % static_cast<std::size_t>(n) == 0) {
      log.breath_norms.push_back(std::sqrt(sum_sq));
      sum_sq = 0.0;
    }
    if (!std::isfinite(u) || !std::isfinite(y) || std::abs(u) > 1e4 || std::abs(y) > 1e4) {
      std::string what = "experiment '" + log.label + "' diverged at sample " + std::to_string(k) + " (command " +
                         io::format_double(u) + " mbar)";
      throw ExperimentDiverged(what, std::move(log));
    }
  }
  return log;
}

struct Comparison {
  std::vector<double> baseline;
  std::vector<double> candidate;
  std::vector<double> ratios;        // candidate / baseline; 0 where the baseline is 0
  std::vector<bool> baseline_zero;
  double converged_ratio = 0.0;      // mean of the last (up to) 5 ratios
};

inline Comparison compare_norms(std::span<const double> baseline, std::span<const double> candidate) {
  if (baseline.size() != candidate.size())
    throw ConfigurationError("compare: breath counts differ (" + std::to_string(baseline.size()) + " vs " +
                             std::to_string(candidate.size()) + ")");
  Comparison c;
  c.baseline.assign(baseline.begin(), baseline.end());
  c.candidate.assign(candidate.begin(), candidate.end());
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    const bool zero = baseline[i] == 0.0;
    c.baseline_zero.push_back(zero);
    c.ratios.push_back(zero ? 0.0 : candidate[i] / baseline[i]);
  }
  const std::size_t tail = std::min<std::size_t>(5, c.ratios.size());
  if (tail > 0) {
    double sum = 0.0;
    for (std::size_t i = c.ratios.size() - tail; i < c.ratios.size(); ++i) sum += c.ratios[i];
    c.converged_ratio = sum / static_cast<double>(tail);
  }
  return c;
}

inline Comparison compare_runs(const BreathLog& baseline, const BreathLog& candidate) {
  if (baseline.period_n != candidate.period_n) throw ConfigurationError("compare: logs have different periods");
  return compare_norms(baseline.breath_norms, candidate.breath_norms);
}

// --- reports ---------------------------------------------------------------

inline void write_trace_csv(const std::filesystem::path& path, const BreathLog& log) {
  auto out = io::open_for_write(path);
  out << "sample,time_s,reference,p_aw,p_lung,q_pat,command\n";
  for (std::size_t k = 0; k < log.samples(); ++k)
    out << k << ',' << static_cast<double>(k) * log.sample_time << ',' << log.reference[k] << ','
        << log.measured_p_aw[k] << ',' << log.p_lung[k] << ',' << log.q_pat[k] << ',' << log.command[k] << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

/// breath,<label>... with one row per breath (1-based).
inline void write_norms_csv(const std::filesystem::path& path, std::span<const BreathLog> logs) {
  auto out = io::open_for_write(path);
  out << "breath";
  std::size_t rows = 0;
  for (const auto& l : logs) {
    out << ',' << l.label;
    rows = std::max(rows, l.breath_norms.size());
  }
  out << '\n';
  for (std::size_t i = 0; i < rows; ++i) {
    out << i + 1;
    for (const auto& l : logs) {
      out << ',';
      if (i < l.breath_norms.size()) out << l.breath_norms[i];
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

/// Reads the first data column of a norms CSV.
inline std::vector<double> read_norms_csv(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  const std::string ctx = path.string();
  std::vector<double> norms;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    const auto cells = io::split(lines[i], ',');
    if (cells.size() < 2) throw ConfigurationError(ctx + ": expected breath,norm columns");
    norms.push_back(io::parse_double(cells[1], ctx));
  }
  return norms;
}

inline void write_comparison_csv(const std::filesystem::path& path, const Comparison& c) {
  auto out = io::open_for_write(path);
  out << "breath,baseline,candidate,ratio\n";
  for (std::size_t i = 0; i < c.ratios.size(); ++i)
    out << i + 1 << ',' << c.baseline[i] << ',' << c.candidate[i] << ',' << c.ratios[i] << '\n';
  out << "# converged_ratio=" << c.converged_ratio << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = io::open_for_write(path);
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline const char* series_color(std::size_t i) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return kColors[i % 6];
}

/// Airway pressure and reference over one breath (default: the last one).
inline std::string pressure_plot(std::span<const BreathLog> logs, std::optional<std::size_t> breath = std::nullopt) {
  std::vector<svg::Series> series;
  std::size_t shown = 0;
  bool reference_drawn = false;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const auto& log = logs[i];
    const std::size_t complete = log.breath_norms.size();
    if (complete == 0) continue;
    shown = std::min(breath.value_or(complete - 1), complete - 1);
    const std::size_t start = log.breath_start(shown);
    svg::Series aw{log.label + " p_aw", {}, {}, series_color(i)};
    svg::Series ref{"reference", {}, {}, "#000000", true};
    for (std::size_t k = start; k < start + static_cast<std::size_t>(log.period_n); ++k) {
      const double t = static_cast<double>(k - start) * log.sample_time;
      aw.x.push_back(t);
      aw.y.push_back(log.measured_p_aw[k]);
      ref.x.push_back(t);
      ref.y.push_back(log.reference[k]);
    }
    if (!reference_drawn) {
      series.push_back(std::move(ref));
      reference_drawn = true;
    }
    series.push_back(std::move(aw));
  }
  svg::PlotSpec spec{"Airway pressure, breath " + std::to_string(shown + 1), "time in breath [s]", "pressure [mbar]"};
  return svg::render_line_plot(spec, series);
}

/// Error 2-norm per breath for each log.
inline std::string norms_plot(std::span<const BreathLog> logs) {
  std::vector<svg::Series> series;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    svg::Series s{logs[i].label, {}, {}, series_color(i)};
    for (std::size_t b = 0; b < logs[i].breath_norms.size(); ++b) {
      s.x.push_back(static_cast<double>(b + 1));
      s.y.push_back(logs[i].breath_norms[b]);
    }
    series.push_back(std::move(s));
  }
  return svg::render_line_plot({"Error 2-norm per breath", "breath", "||e||_2 [mbar]"}, series);
}

/// Writes trace_<label>.csv per log, norms.csv, pressure.svg, norms.svg and,
/// when given, comparison.csv into `out_dir`. Returns the written paths.
inline std::vector<std::filesystem::path> emit_report(std::span<const BreathLog> logs,
                                                      const std::optional<Comparison>& comparison,
                                                      const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (const auto& log : logs) {
    written.push_back(out_dir / ("trace_" + (log.label.empty() ? std::string("run") : log.label) + ".csv"));
    write_trace_csv(written.back(), log);
  }
  written.push_back(out_dir / "norms.csv");
  write_norms_csv(written.back(), logs);
  written.push_back(out_dir / "pressure.svg");
  write_text(written.back(), pressure_plot(logs));
  written.push_back(out_dir / "norms.svg");
  write_text(written.back(), norms_plot(logs));
  if (comparison) {
    written.push_back(out_dir / "comparison.csv");
    write_comparison_csv(written.back(), *comparison);
  }
  return written;
}

}  // namespace ventrc
