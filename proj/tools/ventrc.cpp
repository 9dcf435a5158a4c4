// ventrc command-line front end.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "ventrc/ventrc.hpp"

namespace fs = std::filesystem;
using namespace ventrc;

namespace {

enum ExitCode { kOk = 0, kError = 1, kUnstable = 2, kDiverged = 3 };

OperatingLevel parse_level(const std::string& s) {
  if (s == "peep") return OperatingLevel::Peep;
  if (s == "ipap") return OperatingLevel::Ipap;
  throw ConfigurationError("unknown level '" + s + "' (expected peep or ipap)");
}

std::vector<fs::path> files_with_suffix(const fs::path& dir, const std::string& suffix) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw IoError("no *" + suffix + " files in " + dir.string());
  return out;
}

struct LoadedFrfs {
  std::vector<FrequencyResponse> frfs;
  std::vector<std::string> labels;
};

// Identified FRFs are stored as <label>.frf.csv.
LoadedFrfs load_frf_dir(const fs::path& dir) {
  LoadedFrfs out;
  for (const auto& p : files_with_suffix(dir, ".frf.csv")) {
    out.frfs.push_back(io::read_frf_csv(p));
    std::string label = p.filename().string();
    out.labels.push_back(label.substr(0, label.size() - 8));
  }
  return out;
}

void print_report(const StabilityReport& r) {
  for (std::size_t i = 0; i < r.labels.size(); ++i)
    std::printf("  %-20s max |Q(1-TL)| = %.4f\n", r.labels[i].c_str(), r.frf_max[i]);
  std::printf("  overall max %.4f, margin %.4f: %s\n", r.overall_max, r.margin, r.pass ? "PASS" : "FAIL");
}

void print_comparison(const std::string& name, const Comparison& c) {
  std::printf("%s: converged RC/PID norm ratio %.4f", name.c_str(), c.converged_ratio);
  if (!c.baseline.empty())
    std::printf(" (PID %.4g, RC %.4g in the last breath)", c.baseline.back(), c.candidate.back());
  std::printf("\n");
}

struct DesignArgs {
  int order = 4;
  int delay = 12;
  double cutoff_hz = 23.0;
  int q_order = 50;
  double fit_band_hz = 40.0;
  bool relative = false;
  double min_margin = 0.05;

  void add_to(CLI::App* app) {
    app->add_option("--order", order, "Rational fit order")->capture_default_str();
    app->add_option("--delay", delay, "Fixed delay in samples")->capture_default_str();
    app->add_option("--cutoff-hz", cutoff_hz, "Q filter cutoff")->capture_default_str();
    app->add_option("--q-order", q_order, "Q filter order (even)")->capture_default_str();
    app->add_option("--fit-band-hz", fit_band_hz, "Upper edge of the fit band, 0 for all bins")->capture_default_str();
    app->add_flag("--relative-weights", relative, "Weight the fit by 1/|H|");
    app->add_option("--min-margin", min_margin, "Required stability margin")->capture_default_str();
  }

  DesignOptions options(int period_n) const {
    DesignOptions o;
    o.order = order;
    o.delay = delay;
    o.cutoff_hz = cutoff_hz;
    o.q_order = q_order;
    o.fit_band_hz = fit_band_hz;
    o.relative_weighting = relative;
    o.min_margin = min_margin;
    o.period_n = period_n;
    return o;
  }
};

int run_all(const fs::path& scenario_dir, const fs::path& out_dir, int breaths, const DesignArgs& args) {
  std::vector<ScenarioConfig> configs;
  for (const auto& p : files_with_suffix(scenario_dir, ".cfg")) configs.push_back(load_scenario(p));

  PipelineOptions options;
  options.design = args.options(period_samples(configs.front().patient, configs.front().circuit.sample_time));
  options.breaths = breaths;

  std::printf("identifying %zu scenarios at PEEP and IPAP\n", configs.size());
  const IdentifiedSet id = identify_all(configs, options.excitation);
  const FrequencyResponse mean = average_frf(id.frfs);
  // Ungated so the report is written even when the check fails.
  const DesignResult design = design_filters(id.frfs, mean, options.design, id.labels);
  for (std::size_t i = 0; i < id.frfs.size(); ++i)
    io::write_frf_csv(out_dir / "frf" / (id.labels[i] + ".frf.csv"), id.frfs[i]);
  io::write_frf_csv(out_dir / "frf" / "mean.csv", mean);
  io::write_coefficients(out_dir / "design" / "t_fit.coef", design.fit.tf);
  write_stability_csv(out_dir / "design" / "stability.csv", design.report);
  std::printf("fit: order %d, delay %d, %d iterations; L shift %d\n", options.design.order,
              options.design.delay, design.fit.iterations, design.zpetc.l_shift);
  print_report(design.report);
  if (!design.report.pass || design.report.margin < options.design.min_margin) {
    std::fprintf(stderr, "stability check failed; RC experiments not run\n");
    return kUnstable;
  }

  std::vector<BreathLog> all_logs;
  for (const auto& cfg : configs) {
    const auto filters =
        with_period(design.filters, period_samples(cfg.patient, cfg.circuit.sample_time));
    write_filterset(out_dir / "design" / (cfg.patient.name + ".filterset"), filters);
    ExperimentSpec spec;
    spec.scenario = cfg;
    spec.breaths = breaths;
    std::vector<BreathLog> logs{run_experiment(spec)};
    spec.mode = ControllerMode::PidRc;
    spec.filterset = filters;
    logs.push_back(run_experiment(spec));
    const auto comparison = compare_runs(logs[0], logs[1]);
    emit_report(logs, comparison, out_dir / "runs" / cfg.patient.name);
    print_comparison(cfg.patient.name, comparison);
    all_logs.insert(all_logs.end(), logs.begin(), logs.end());
  }
  write_norms_csv(out_dir / "norms_all.csv", all_logs);
  write_text(out_dir / "norms_all.svg", norms_plot(all_logs));
  std::printf("artifacts written to %s\n", out_dir.string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Repetitive-control design toolkit and ventilation testbench"};
  app.require_subcommand(1);

  // identify
  std::string scenario_path, level = "peep", out_path;
  int period = 2000;
  auto* identify = app.add_subcommand("identify", "Estimate the closed-loop FRF of one scenario");
  identify->add_option("--scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
  identify->add_option("--level", level, "Operating level: peep or ipap")->capture_default_str();
  identify->add_option("--period", period, "Multisine period in samples")->capture_default_str();
  identify->add_option("--out", out_path, "Output FRF CSV")->required();

  // average
  std::vector<std::string> inputs;
  auto* average = app.add_subcommand("average", "Bin-wise mean of FRF files");
  average->add_option("--in", inputs, "Input FRF CSVs")->required()->check(CLI::ExistingFile);
  average->add_option("--out", out_path, "Output FRF CSV")->required();

  // fit
  std::string in_path;
  DesignArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit a delayed rational model to an FRF");
  fit->add_option("--in", in_path, "Input FRF CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--order", fit_args.order, "Model order")->capture_default_str();
  fit->add_option("--delay", fit_args.delay, "Fixed delay in samples")->capture_default_str();
  fit->add_option("--fit-band-hz", fit_args.fit_band_hz, "Upper edge of the fit band, 0 for all bins")
      ->capture_default_str();
  fit->add_flag("--relative-weights", fit_args.relative, "Weight the fit by 1/|H|");
  fit->add_option("--out", out_path, "Output coefficient file")->required();

  // design
  std::string frf_dir, report_path;
  int period_n = 2000;
  DesignArgs design_args;
  auto* design = app.add_subcommand("design", "Fit, invert, design Q and check stability");
  design->add_option("--frf-dir", frf_dir, "Directory of *.frf.csv files")->required()->check(CLI::ExistingDirectory);
  design->add_option("--period-n", period_n, "Samples per breath")->capture_default_str();
  design->add_option("--out", out_path, "Output filter set")->required();
  design->add_option("--report", report_path, "Optional stability CSV");
  design_args.add_to(design);

  // check-stability
  std::string filterset_path;
  auto* check = app.add_subcommand("check-stability", "Evaluate |Q(1-TL)| for a filter set");
  check->add_option("--filterset", filterset_path, "Filter set file")->required()->check(CLI::ExistingFile);
  check->add_option("--frf-dir", frf_dir, "Directory of *.frf.csv files")->required()->check(CLI::ExistingDirectory);
  check->add_option("--report", report_path, "Optional stability CSV");

  // run
  std::string mode = "pid", out_dir;
  int breaths = 20;
  std::uint64_t seed = 0;
  double noise = 0.0;
  auto* run = app.add_subcommand("run", "Simulate one scenario");
  run->add_option("--scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", mode, "pid or rc")->capture_default_str();
  run->add_option("--breaths", breaths, "Number of breaths")->capture_default_str();
  run->add_option("--filterset", filterset_path, "Filter set (rc mode)")->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Noise seed")->capture_default_str();
  run->add_option("--noise", noise, "Measurement noise std [mbar]")->capture_default_str();
  run->add_option("--out-dir", out_dir, "Output directory")->required();

  // compare
  std::string baseline_path, candidate_path;
  auto* compare = app.add_subcommand("compare", "Per-breath norm ratios of two runs");
  compare->add_option("--baseline", baseline_path, "Baseline norms.csv")->required()->check(CLI::ExistingFile);
  compare->add_option("--candidate", candidate_path, "Candidate norms.csv")->required()->check(CLI::ExistingFile);
  compare->add_option("--out", out_path, "Optional comparison CSV");

  // all
  std::string scenario_dir;
  DesignArgs all_args;
  auto* all = app.add_subcommand("all", "Identify, design, check and compare on every scenario");
  all->add_option("--scenario-dir", scenario_dir, "Directory of *.cfg files")
      ->required()
      ->check(CLI::ExistingDirectory);
  all->add_option("--out-dir", out_dir, "Output directory")->required();
  all->add_option("--breaths", breaths, "Breaths per run")->capture_default_str();
  all_args.add_to(all);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*identify) {
      const auto cfg = load_scenario(scenario_path);
      const auto frf = identify_scenario(cfg, parse_level(level), MultisineSpec::full_band(period));
      io::write_frf_csv(out_path, frf);
      std::printf("%zu bins written to %s\n", frf.size(), out_path.c_str());
    } else if (*average) {
      std::vector<FrequencyResponse> frfs;
      for (const auto& p : inputs) frfs.push_back(io::read_frf_csv(p));
      io::write_frf_csv(out_path, average_frf(frfs));
    } else if (*fit) {
      const auto frf = io::read_frf_csv(in_path);
      const auto data = fit_args.fit_band_hz > 0.0 ? restrict_band(frf, 0.0, fit_args.fit_band_hz) : frf;
      FitOptions options;
      if (fit_args.relative) options.weights = relative_weights(data);
      const auto result = fit_rational(data, fit_args.order, fit_args.delay, options);
      io::write_coefficients(out_path, result.tf);
      std::printf("%d iterations, %s, residual %.6g%s\n", result.iterations,
                  result.converged ? "converged" : "not converged", result.residual,
                  result.poles_reflected ? ", poles reflected" : "");
    } else if (*design) {
      const auto loaded = load_frf_dir(frf_dir);
      const auto mean = average_frf(loaded.frfs);
      const auto options = design_args.options(period_n);
      const auto result = design_filters(loaded.frfs, mean, options, loaded.labels);
      if (!report_path.empty()) write_stability_csv(report_path, result.report);
      print_report(result.report);
      if (!result.report.pass || result.report.margin < options.min_margin) {
        std::fprintf(stderr, "stability check failed; no filter set written\n");
        return kUnstable;
      }
      write_filterset(out_path, result.filters);
      std::printf("filter set written to %s (l_shift %d, q_shift %d, N %d)\n", out_path.c_str(),
                  result.filters.l_shift, result.filters.q_kernel.forward_shift(), result.filters.period_n);
    } else if (*check) {
      const auto set = read_filterset(filterset_path);
      const auto loaded = load_frf_dir(frf_dir);
      const auto report = check_stability(set.q_kernel, set.l_causal, set.l_shift, loaded.frfs, loaded.labels);
      if (!report_path.empty()) write_stability_csv(report_path, report);
      print_report(report);
      return report.pass ? kOk : kUnstable;
    } else if (*run) {
      ExperimentSpec spec;
      spec.scenario = load_scenario(scenario_path);
      spec.mode = parse_mode(mode);
      spec.breaths = breaths;
      spec.seed = seed;
      spec.measurement_noise_std = noise;
      if (!filterset_path.empty()) spec.filterset = read_filterset(filterset_path);
      const std::vector<BreathLog> logs{run_experiment(spec)};
      emit_report(logs, std::nullopt, out_dir);
      std::printf("%s: last breath norm %.6g\n", logs[0].label.c_str(), logs[0].breath_norms.back());
    } else if (*compare) {
      const auto c = compare_norms(read_norms_csv(baseline_path), read_norms_csv(candidate_path));
      if (!out_path.empty()) write_comparison_csv(out_path, c);
      std::printf("breath,ratio\n");
      for (std::size_t i = 0; i < c.ratios.size(); ++i) std::printf("%zu,%.6g\n", i + 1, c.ratios[i]);
      print_comparison("candidate/baseline", c);
    } else if (*all) {
      return run_all(scenario_dir, out_dir, breaths, all_args);
    }
  } catch (const ExperimentDiverged& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDiverged;
  } catch (const DesignError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUnstable;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kError;
  }
  return kOk;
}
