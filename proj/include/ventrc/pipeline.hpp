#pragma once

// End-to-end run: identify every scenario at PEEP and IPAP, fit and invert
// the mean FRF, design Q, check stability, then simulate PID and PID+RC.

#include <span>
#include <string>
#include <vector>

#include "ventrc/benchmark.hpp"
#include "ventrc/config.hpp"
#include "ventrc/harness.hpp"
#include "ventrc/rc_design.hpp"
#include "ventrc/sysid.hpp"

namespace ventrc {

struct PipelineOptions {
  DesignOptions design;
  MultisineSpec excitation = MultisineSpec::full_band();
  int breaths = 20;
};

struct ScenarioOutcome {
  std::string name;
  RcFilterSet filters;
  BreathLog pid;
  BreathLog rc;
  Comparison comparison;
};

struct PipelineResult {
  std::vector<std::string> frf_labels;
  std::vector<FrequencyResponse> frfs;
  FrequencyResponse mean_frf;
  DesignResult design;
  std::vector<ScenarioOutcome> scenarios;
};

enum class OperatingLevel { Peep, Ipap };

inline FrequencyResponse identify_scenario(const ScenarioConfig& cfg, OperatingLevel level,
                                           const MultisineSpec& excitation) {
  const double op = level == OperatingLevel::Peep ? cfg.patient.peep : cfg.patient.ipap;
  return estimate_frf(PlantSimulator(cfg.circuit, cfg.patient),
                      integral_controller(kBenchmarkIntegralGain, cfg.circuit.sample_time), op, excitation);
}

/// A copy of `filters` with the memory loop resized to `period_n`.
inline RcFilterSet with_period(RcFilterSet filters, int period_n) {
  filters.period_n = period_n;
  filters.validate();
  return filters;
}

struct IdentifiedSet {
  std::vector<std::string> labels;  // <scenario>_peep, <scenario>_ipap, ...
  std::vector<FrequencyResponse> frfs;
};

inline IdentifiedSet identify_all(std::span<const ScenarioConfig> scenarios, const MultisineSpec& excitation) {
  if (scenarios.empty()) throw ConfigurationError("pipeline: no scenarios");
  IdentifiedSet out;
  for (const auto& cfg : scenarios) {
    for (auto level : {OperatingLevel::Peep, OperatingLevel::Ipap}) {
      out.labels.push_back(cfg.patient.name + (level == OperatingLevel::Peep ? "_peep" : "_ipap"));
      out.frfs.push_back(identify_scenario(cfg, level, excitation));
    }
  }
  return out;
}

/// Identification and design only. Throws DesignError if the check fails.
inline PipelineResult identify_and_design(std::span<const ScenarioConfig> scenarios, const PipelineOptions& options,
                                          const WarningSink& warn = stderr_warnings()) {
  IdentifiedSet id = identify_all(scenarios, options.excitation);
  FrequencyResponse mean = average_frf(id.frfs);
  DesignResult design = design_pipeline(id.frfs, mean, options.design, id.labels, warn);
  return {std::move(id.labels), std::move(id.frfs), std::move(mean), std::move(design), {}};
}

inline PipelineResult run_pipeline(std::span<const ScenarioConfig> scenarios, const PipelineOptions& options,
                                   const WarningSink& warn = stderr_warnings()) {
  PipelineResult result = identify_and_design(scenarios, options, warn);
  for (const auto& cfg : scenarios) {
    RcFilterSet filters =
        with_period(result.design.filters, period_samples(cfg.patient, cfg.circuit.sample_time));
    ExperimentSpec spec;
    spec.scenario = cfg;
    spec.breaths = options.breaths;
    BreathLog pid = run_experiment(spec);
    spec.mode = ControllerMode::PidRc;
    spec.filterset = filters;
    BreathLog rc = run_experiment(spec);
    Comparison comparison = compare_runs(pid, rc);
    result.scenarios.push_back({cfg.patient.name, std::move(filters), std::move(pid), std::move(rc),
                                std::move(comparison)});
  }
  return result;
}

}  // namespace ventrc
