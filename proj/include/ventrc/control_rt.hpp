#pragma once

// Per-sample controllers. The repetitive controller is an add-on in front of
// the integral controller:  command = C(e + R e).

#include <cmath>
#include <optional>
#include <utility>

#include "ventrc/benchmark.hpp"
#include "ventrc/errors.hpp"
#include "ventrc/lti.hpp"
#include "ventrc/rc_design.hpp"

namespace ventrc {

struct OutputLimits {
  double lo = 0.0;
  double hi = 80.0;
};

/// Discrete integrator u(k) = u(k-1) + Ki e(k-1). With limits, the output is
/// clamped and integration holds while clamped.
class PidController {
 public:
  explicit PidController(double integral_gain = kBenchmarkIntegralGain,
                         std::optional<OutputLimits> limits = std::nullopt)
      : ki_(integral_gain), limits_(limits) {
    if (limits_ && !(limits_->lo < limits_->hi)) throw ConfigurationError("PID: output limits must satisfy lo < hi");
  }

  double step(double error) {
    const double next = output_ + ki_ * previous_error_;
    // Clamping the integrator state itself keeps it from winding up.
    if (limits_ && (next > limits_->hi || next < limits_->lo)) {
      output_ = next > limits_->hi ? limits_->hi : limits_->lo;
      saturated_ = true;
    } else {
      output_ = next;
      saturated_ = false;
    }
    previous_error_ = error;
    return output_;
  }

  bool saturated() const { return saturated_; }
  double output() const { return output_; }

 private:
  double ki_;
  std::optional<OutputLimits> limits_;
  double output_ = 0.0;
  double previous_error_ = 0.0;
  bool saturated_ = false;
};

/// Memory loop realizing R = L z^-N Q (1 - z^-N Q)^-1 with the forward
/// shifts of L and Q absorbed into the N-sample delay:
///
///   a(k) = e(k) + v(k - (N - p_q))        v = Q_c a
///   s(k) = v(k - (N - p_q - l_shift))
///   out(k) = (L_c s)(k)
///
/// The v history is held in two delay lines of lengths N - p_q - l_shift
/// (v -> s) and l_shift (s -> feedback). Output is exactly zero for the
/// first N - p_q - l_shift samples.
class RepetitiveController {
 public:
  explicit RepetitiveController(RcFilterSet filters)
      : filters_(std::move(filters)),
        q_(filters_.q_kernel.causal(filters_.sample_time())),
        l_(filters_.l_causal),
        memory_((filters_.validate(), filters_.memory_length())) {
    if (filters_.l_shift > 0) lookahead_.emplace(filters_.l_shift);
  }

  double step(double error) {
    ++samples_;
    if (faulted_) return 0.0;
    const double s = memory_.oldest();
    const double feedback = lookahead_ ? lookahead_->step(s) : s;
    const double v = q_.step(error + feedback);
    memory_.step(v);
    const double out = l_.step(s);
    if (!std::isfinite(out) || !std::isfinite(v) || std::abs(out) > kFaultLimit) {
      faulted_ = true;
      return 0.0;
    }
    return out;
  }

  bool faulted() const { return faulted_; }
  long samples() const { return samples_; }
  const RcFilterSet& filters() const { return filters_; }

  static constexpr double kFaultLimit = 1e9;

 private:
  RcFilterSet filters_;
  IirFilter q_;
  IirFilter l_;
  DelayLine memory_;
  std::optional<DelayLine> lookahead_;
  long samples_ = 0;
  bool faulted_ = false;
};

struct ControllerConfig {
  double integral_gain = kBenchmarkIntegralGain;
  double sample_time = kBenchmarkSampleTime;
  std::optional<RcFilterSet> filterset;
  bool rc_enabled = false;
  std::optional<OutputLimits> output_limits;
};

/// e = reference - measurement; command = PID(e + RC(e)).
class Controller {
 public:
  explicit Controller(const ControllerConfig& config) : pid_(config.integral_gain, config.output_limits) {
    detail::require_sample_time(config.sample_time);
    if (config.rc_enabled) {
      if (!config.filterset) throw ConfigurationError("controller: RC enabled without a filter set");
      if (std::abs(config.filterset->sample_time() - config.sample_time) > 1e-12 * config.sample_time)
        throw ConfigurationError("controller: filter set sample time differs from controller sample time");
      rc_.emplace(*config.filterset);
    }
  }

  double step(double reference, double measurement) {
    const double error = reference - measurement;
    double drive = error;
    if (rc_) {
      last_rc_ = rc_->step(error);
      drive += last_rc_;
    }
    return pid_.step(drive);
  }

  bool rc_active() const { return rc_ && !rc_->faulted(); }
  bool rc_faulted() const { return rc_ && rc_->faulted(); }
  double last_rc_output() const { return last_rc_; }
  const PidController& pid() const { return pid_; }

 private:
  PidController pid_;
  std::optional<RepetitiveController> rc_;
  double last_rc_ = 0.0;
};

}  // namespace ventrc
