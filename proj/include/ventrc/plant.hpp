#pragma once

// Blower -> hose -> patient model.
//
//   p_control --[blower delay]--> first-order lag --> p_out
//   p_out --R_hose--> p_aw --R_leak--> ambient
//                       \--R_lung--> p_lung (compliance C_lung)
//   p_aw --[measurement delay]--> measured p_aw
//
// The lag and the lung pole are discretized exactly under a zero-order hold
// on their inputs, which makes closed_form_tf() an exact description of
// PlantSimulator::step().

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ventrc/errors.hpp"
#include "ventrc/lti.hpp"

namespace ventrc {

/// One row of the ventilation scenario table. Units: mbar, L, s.
struct PatientScenario {
  std::string name;
  double r_lung = 0.0;            // mbar*s/L
  double c_lung = 0.0;            // L/mbar
  double respiratory_rate = 0.0;  // breaths/min
  double peep = 0.0;              // mbar
  double ipap = 0.0;              // mbar
  double t_insp = 0.0;            // s
  double t_exp = 0.0;             // s

  double period_s() const { return t_insp + t_exp; }

  void validate() const {
    if (!(r_lung > 0.0) || !(c_lung > 0.0))
      throw ConfigurationError("scenario '" + name + "': r_lung and c_lung must be positive");
    if (!(respiratory_rate > 0.0)) throw ConfigurationError("scenario '" + name + "': respiratory_rate must be positive");
    if (std::abs(t_insp + t_exp - 60.0 / respiratory_rate) > 1e-9)
      throw ConfigurationError("scenario '" + name + "': t_insp + t_exp must equal 60 / respiratory_rate");
    if (!(t_insp > 0.0) || !(t_exp > 0.0))
      throw ConfigurationError("scenario '" + name + "': phase durations must be positive");
    // PEEP = IPAP is accepted as the constant-pressure degenerate profile.
    if (!(peep >= 0.0) || ipap < peep)
      throw ConfigurationError("scenario '" + name + "': need ipap >= peep >= 0");
  }
};

inline PatientScenario adult_scenario() { return {"adult", 5.0, 50e-3, 15.0, 5.0, 15.0, 1.5, 2.5}; }
inline PatientScenario pediatric_scenario() { return {"pediatric", 50.0, 10e-3, 20.0, 5.0, 35.0, 1.0, 2.0}; }
inline PatientScenario baby_scenario() { return {"baby", 50.0, 3e-3, 30.0, 10.0, 25.0, 0.6, 1.4}; }

inline std::vector<PatientScenario> canonical_scenarios() {
  return {adult_scenario(), pediatric_scenario(), baby_scenario()};
}

/// Hose, leak and blower. Defaults are shared by all scenarios.
struct CircuitParameters {
  double r_hose = 5.0;                // mbar*s/L
  double r_leak = 50.0;               // mbar*s/L
  double blower_time_constant = 0.010;  // s; 0 means no lag
  int blower_delay_samples = 6;
  int measurement_delay_samples = 6;
  double sample_time = 2e-3;          // s

  int total_delay_samples() const { return blower_delay_samples + measurement_delay_samples; }

  void validate() const {
    if (!(r_hose > 0.0) || !(r_leak > 0.0)) throw ConfigurationError("circuit: r_hose and r_leak must be positive");
    if (!(blower_time_constant >= 0.0)) throw ConfigurationError("circuit: blower_time_constant must be >= 0");
    if (blower_delay_samples < 0 || measurement_delay_samples < 0)
      throw ConfigurationError("circuit: delays must be >= 0");
    detail::require_sample_time(sample_time);
  }
};

struct AirwayNode {
  double p_aw = 0.0;    // mbar
  double q_out = 0.0;   // L/s through the hose
  double q_leak = 0.0;  // L/s
  double q_pat = 0.0;   // L/s into the patient
};

/// Static flow balance (p_out - p_aw)/R_hose = p_aw/R_leak + (p_aw - p_lung)/R_lung.
inline AirwayNode airway_pressure_node(double p_out, double p_lung, const CircuitParameters& circuit,
                                       const PatientScenario& patient) {
  const double g_hose = 1.0 / circuit.r_hose;
  const double g_leak = 1.0 / circuit.r_leak;
  const double g_lung = 1.0 / patient.r_lung;
  AirwayNode n;
  n.p_aw = (p_out * g_hose + p_lung * g_lung) / (g_hose + g_leak + g_lung);
  n.q_out = (p_out - n.p_aw) * g_hose;
  n.q_leak = n.p_aw * g_leak;
  n.q_pat = (n.p_aw - p_lung) * g_lung;
  return n;
}

namespace detail {

// Coefficients of the discretized chain, shared by the simulator and the
// closed-form transfer function.
struct PlantCoefficients {
  bool has_lag = false;
  double lag_pole = 0.0;    // e^{-Ts/tau}
  double lung_pole = 0.0;   // e^{-beta Ts}
  double lung_gain = 0.0;   // steady-state p_lung / p_out
  double aw_from_out = 0.0;   // dp_aw/dp_out at fixed p_lung
  double aw_from_lung = 0.0;  // dp_aw/dp_lung at fixed p_out
};

inline PlantCoefficients plant_coefficients(const CircuitParameters& c, const PatientScenario& p) {
  const double g_hose = 1.0 / c.r_hose;
  const double g_leak = 1.0 / c.r_leak;
  const double g_lung = 1.0 / p.r_lung;
  const double g_sum = g_hose + g_leak + g_lung;
  PlantCoefficients k;
  k.has_lag = c.blower_time_constant > 0.0;
  k.lag_pole = k.has_lag ? std::exp(-c.sample_time / c.blower_time_constant) : 0.0;
  k.aw_from_out = g_hose / g_sum;
  k.aw_from_lung = g_lung / g_sum;
  // dp_lung/dt = q_pat / C = (g_lung / C) * (aw_from_out p_out - (1 - aw_from_lung) p_lung)
  const double rate = g_lung * (1.0 - k.aw_from_lung) / p.c_lung;
  k.lung_pole = std::exp(-rate * c.sample_time);
  k.lung_gain = k.aw_from_out / (1.0 - k.aw_from_lung);
  return k;
}

}  // namespace detail

/// One simulated sample of the plant.
struct PlantSample {
  double p_control = 0.0;
  double p_out = 0.0;
  double p_aw = 0.0;
  double measured_p_aw = 0.0;
  double p_lung = 0.0;
  double q_out = 0.0;
  double q_leak = 0.0;
  double q_pat = 0.0;
};

/// Streaming simulator. Starts from zero pressure everywhere.
class PlantSimulator {
 public:
  PlantSimulator(CircuitParameters circuit, PatientScenario patient)
      : circuit_(circuit), patient_(std::move(patient)) {
    circuit_.validate();
    patient_.validate();
    k_ = detail::plant_coefficients(circuit_, patient_);
    if (circuit_.blower_delay_samples > 0) blower_delay_.emplace(circuit_.blower_delay_samples);
    if (circuit_.measurement_delay_samples > 0) measurement_delay_.emplace(circuit_.measurement_delay_samples);
  }

  /// True when the measurement at sample k does not depend on the command
  /// at sample k, i.e. the plant can sit in a feedback loop with a
  /// controller that reads the measurement first.
  bool strictly_proper() const {
    return k_.has_lag || blower_delay_ || measurement_delay_;
  }

  /// Measured airway pressure at the current sample, before step() is
  /// called with this sample's command. Requires strictly_proper().
  double measured() const {
    if (measurement_delay_) return measurement_delay_->oldest();
    if (!strictly_proper())
      throw ConfigurationError("plant has direct feedthrough; measurement depends on the current command");
    const double p_out = k_.has_lag ? lag_state_ : blower_delay_->oldest();
    return airway_pressure_node(p_out, p_lung_, circuit_, patient_).p_aw;
  }

  PlantSample step(double p_control) {
    PlantSample s;
    s.p_control = p_control;
    const double delayed = blower_delay_ ? blower_delay_->step(p_control) : p_control;
    s.p_out = k_.has_lag ? lag_state_ : delayed;
    s.p_lung = p_lung_;
    const AirwayNode node = airway_pressure_node(s.p_out, p_lung_, circuit_, patient_);
    s.p_aw = node.p_aw;
    s.q_out = node.q_out;
    s.q_leak = node.q_leak;
    s.q_pat = node.q_pat;
    s.measured_p_aw = measurement_delay_ ? measurement_delay_->step(node.p_aw) : node.p_aw;

    if (k_.has_lag) lag_state_ = k_.lag_pole * lag_state_ + (1.0 - k_.lag_pole) * delayed;
    p_lung_ = k_.lung_pole * p_lung_ + (1.0 - k_.lung_pole) * k_.lung_gain * s.p_out;
    return s;
  }

  double p_lung() const { return p_lung_; }
  const CircuitParameters& circuit() const { return circuit_; }
  const PatientScenario& patient() const { return patient_; }

 private:
  CircuitParameters circuit_;
  PatientScenario patient_;
  detail::PlantCoefficients k_;
  double p_lung_ = 0.0;
  double lag_state_ = 0.0;
  std::optional<DelayLine> blower_delay_;
  std::optional<DelayLine> measurement_delay_;
};

/// Exact transfer function from p_control to measured p_aw.
inline TransferFunction closed_form_tf(const CircuitParameters& circuit, const PatientScenario& patient) {
  circuit.validate();
  patient.validate();
  const auto k = detail::plant_coefficients(circuit, patient);
  // p_aw / p_out = (aw_from_out (1 - b z^-1) + aw_from_lung (1 - b) g z^-1) / (1 - b z^-1)
  const double b = k.lung_pole;
  std::vector<double> num{k.aw_from_out, k.aw_from_lung * (1.0 - b) * k.lung_gain - k.aw_from_out * b};
  std::vector<double> den{1.0, -b};
  if (k.has_lag) {
    // (1 - a) z^-1 / (1 - a z^-1)
    const double a = k.lag_pole;
    num = poly_multiply(std::vector<double>{0.0, 1.0 - a}, num);
    den = poly_multiply(std::vector<double>{1.0, -a}, den);
  }
  return {std::move(num), std::move(den), circuit.total_delay_samples(), circuit.sample_time};
}

/// Samples per breath for the scenario at the given sample time.
inline int period_samples(const PatientScenario& scenario, double sample_time) {
  return static_cast<int>(std::lround(scenario.period_s() / sample_time));
}

/// One period of the PEEP -> IPAP -> PEEP target. Inspiration starts at
/// sample 0. With `rise_time` the edges pass through a first-order lag and
/// the periodic steady state of that lag is returned.
inline std::vector<double> reference_profile(const PatientScenario& scenario, double sample_time,
                                             std::optional<double> rise_time = std::nullopt) {
  detail::require_sample_time(sample_time);
  const double insp = scenario.t_insp / sample_time;
  const double exp = scenario.t_exp / sample_time;
  if (std::abs(insp - std::round(insp)) > 1e-6 || std::abs(exp - std::round(exp)) > 1e-6)
    throw ConfigurationError("reference_profile: sample time does not divide the breath phases");
  const int n_insp = static_cast<int>(std::lround(insp));
  const int n = n_insp + static_cast<int>(std::lround(exp));
  if (n <= 0) throw ConfigurationError("reference_profile: period has no samples");

  std::vector<double> profile(static_cast<std::size_t>(n), scenario.peep);
  for (int i = 0; i < n_insp && i < n; ++i) profile[i] = scenario.ipap;
  if (!rise_time || *rise_time <= 0.0) return profile;

  // Periodic steady state of y[k+1] = a y[k] + (1 - a) x[k]:
  // y_N = a^N y_0 + F with F the zero-state response, so y_0 = F / (1 - a^N).
  const double a = std::exp(-sample_time / *rise_time);
  double y = 0.0;
  for (double x : profile) y = a * y + (1.0 - a) * x;
  y /= (1.0 - std::pow(a, n));
  std::vector<double> smoothed(profile.size());
  for (std::size_t i = 0; i < profile.size(); ++i) {
    smoothed[i] = y;
    y = a * y + (1.0 - a) * profile[i];
  }
  return smoothed;
}

}  // namespace ventrc
