#pragma once

// Discrete-time LTI primitives: rational transfer functions in z^-1 with an
// explicit pure delay, zero-phase FIR kernels, streaming filters, delay lines
// and frequency-response evaluation.

#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ventrc/errors.hpp"
#include "ventrc/polynomial.hpp"

namespace ventrc {

// Frequencies are Hz at every public boundary and radians/sample inside the
// evaluators. These two helpers are the only place the conversion happens.
inline double angular_frequency(double frequency_hz, double sample_time) {
  return 2.0 * kPi * frequency_hz * sample_time;
}

inline double nyquist_hz(double sample_time) { return 0.5 / sample_time; }

namespace detail {

inline void require_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw ConfigurationError(std::string(what) + ": non-finite coefficient");
}

inline void require_sample_time(double sample_time) {
  if (!(sample_time > 0.0) || !std::isfinite(sample_time))
    throw ConfigurationError("sample_time must be positive and finite");
}

}  // namespace detail

/// B(z^-1) / A(z^-1) * z^-pure_delay with A normalized to A[0] = 1.
class TransferFunction {
 public:
  TransferFunction(std::vector<double> numerator, std::vector<double> denominator, int pure_delay,
                   double sample_time)
      : num_(std::move(numerator)), den_(std::move(denominator)), delay_(pure_delay), ts_(sample_time) {
    detail::require_sample_time(ts_);
    if (num_.empty()) throw ConfigurationError("transfer function: empty numerator");
    if (den_.empty() || den_.front() == 0.0)
      throw ConfigurationError("transfer function: denominator leading coefficient must be nonzero");
    if (delay_ < 0) throw ConfigurationError("transfer function: pure_delay must be >= 0");
    detail::require_finite(num_, "numerator");
    detail::require_finite(den_, "denominator");
    const double lead = den_.front();
    if (lead != 1.0) {
      for (double& c : num_) c /= lead;
      for (double& c : den_) c /= lead;
    }
  }

  static TransferFunction gain(double g, double sample_time) { return {{g}, {1.0}, 0, sample_time}; }
  static TransferFunction delay(int samples, double sample_time) { return {{1.0}, {1.0}, samples, sample_time}; }

  const std::vector<double>& numerator() const { return num_; }
  const std::vector<double>& denominator() const { return den_; }
  int pure_delay() const { return delay_; }
  double sample_time() const { return ts_; }

  /// Leading numerator coefficients that are exactly zero (delay hidden in
  /// the numerator, beyond pure_delay).
  int relative_degree() const {
    int p = 0;
    while (p < static_cast<int>(num_.size()) && num_[p] == 0.0) ++p;
    return p;
  }

  /// Value at z = e^{i omega}, omega in radians/sample.
  Complex response(double omega) const {
    const Complex d = poly_eval(std::span<const double>(den_), omega);
    if (std::abs(d) < 1e-14) {
      std::ostringstream msg;
      msg << "transfer function denominator vanishes at " << omega / (2.0 * kPi * ts_) << " Hz";
      throw SingularityError(msg.str(), omega / (2.0 * kPi * ts_));
    }
    return poly_eval(std::span<const double>(num_), omega) / d * std::polar(1.0, -omega * delay_);
  }

  Complex response_hz(double frequency_hz) const { return response(angular_frequency(frequency_hz, ts_)); }

  double dc_gain() const {
    const double d = poly_sum(den_);
    if (std::abs(d) < 1e-14) throw SingularityError("transfer function has a pole at z = 1", 0.0);
    return poly_sum(num_) / d;
  }

  bool is_stable() const { return poly_is_schur_stable(den_); }

  /// Series connection (product).
  TransferFunction operator*(const TransferFunction& other) const {
    require_same_rate(other);
    return {poly_multiply(num_, other.num_), poly_multiply(den_, other.den_), delay_ + other.delay_, ts_};
  }

  /// Numerator with the pure delay folded in as leading zeros.
  std::vector<double> expanded_numerator() const { return poly_delay(num_, delay_); }

  void require_same_rate(const TransferFunction& other) const {
    if (std::abs(ts_ - other.ts_) > 1e-12 * ts_)
      throw ConfigurationError("transfer functions have different sample times");
  }

 private:
  std::vector<double> num_;
  std::vector<double> den_;
  int delay_;
  double ts_;
};

/// gain z^-delay prod(1 - z_i z^-1) / prod(1 - p_i z^-1), evaluated factor by
/// factor. Stays accurate when roots cluster near z = 1, where expanded
/// coefficients lose most of their significant digits. A negative delay is
/// a forward shift.
struct ZeroPoleGain {
  std::vector<Complex> zeros;
  std::vector<Complex> poles;
  double gain = 1.0;
  int delay = 0;

  Complex response(double omega) const {
    const Complex zinv = std::polar(1.0, -omega);
    Complex num = gain;
    Complex den = 1.0;
    for (const Complex& z : zeros) num *= 1.0 - z * zinv;
    for (const Complex& p : poles) den *= 1.0 - p * zinv;
    return num / den * std::polar(1.0, -omega * delay);
  }
};

/// T = PC / (1 + PC) as an exact rational function.
inline TransferFunction complementary_sensitivity(const TransferFunction& plant,
                                                  const TransferFunction& controller) {
  const TransferFunction loop = plant * controller;
  const auto den = poly_add(loop.denominator(), loop.expanded_numerator());
  return {loop.numerator(), den, loop.pure_delay(), loop.sample_time()};
}

/// Complex response sampled on a strictly increasing grid in (0, Nyquist].
class FrequencyResponse {
 public:
  FrequencyResponse(std::vector<double> frequencies_hz, std::vector<Complex> values, double sample_time)
      : freq_(std::move(frequencies_hz)), values_(std::move(values)), ts_(sample_time) {
    detail::require_sample_time(ts_);
    if (freq_.size() != values_.size())
      throw ConfigurationError("frequency response: frequency and value counts differ");
    const double nyq = nyquist_hz(ts_);
    for (std::size_t i = 0; i < freq_.size(); ++i) {
      if (!(freq_[i] > 0.0) || freq_[i] > nyq * (1.0 + 1e-12))
        throw DomainError("frequency response: frequency outside (0, Nyquist]");
      if (i > 0 && !(freq_[i] > freq_[i - 1]))
        throw ConfigurationError("frequency response: frequencies must be strictly increasing");
    }
  }

  std::size_t size() const { return freq_.size(); }
  bool empty() const { return freq_.empty(); }
  const std::vector<double>& frequencies_hz() const { return freq_; }
  const std::vector<Complex>& values() const { return values_; }
  double sample_time() const { return ts_; }
  double omega(std::size_t i) const { return angular_frequency(freq_[i], ts_); }

  bool same_grid(const FrequencyResponse& other) const {
    return freq_ == other.freq_ && ts_ == other.ts_;
  }

 private:
  std::vector<double> freq_;
  std::vector<Complex> values_;
  double ts_;
};

inline FrequencyResponse evaluate(const TransferFunction& tf, std::span<const double> frequencies_hz) {
  const double nyq = nyquist_hz(tf.sample_time());
  std::vector<Complex> values;
  values.reserve(frequencies_hz.size());
  for (double f : frequencies_hz) {
    if (!(f > 0.0) || f > nyq * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "evaluate: frequency " << f << " Hz outside (0, " << nyq << "] Hz";
      throw DomainError(msg.str());
    }
    values.push_back(tf.response_hz(f));
  }
  return {{frequencies_hz.begin(), frequencies_hz.end()}, std::move(values), tf.sample_time()};
}

/// Realized filter z^{forward_shift} * sum_k taps[k] z^-k.
class FirKernel {
 public:
  FirKernel(std::vector<double> taps, int forward_shift, bool zero_phase = false)
      : taps_(std::move(taps)), shift_(forward_shift), zero_phase_(zero_phase) {
    if (taps_.empty()) throw ConfigurationError("FIR kernel needs at least one tap");
    if (shift_ < 0) throw ConfigurationError("FIR forward_shift must be >= 0");
    if (shift_ > static_cast<int>(taps_.size()))
      throw ConfigurationError("FIR forward_shift exceeds the number of taps");
    detail::require_finite(taps_, "FIR taps");
    if (zero_phase_) {
      if (static_cast<int>(taps_.size()) != 2 * shift_ + 1)
        throw ConfigurationError("zero-phase FIR must have 2*forward_shift+1 taps");
      double scale = 0.0;
      for (double t : taps_) scale = std::max(scale, std::abs(t));
      for (std::size_t i = 0; i < taps_.size(); ++i)
        if (std::abs(taps_[i] - taps_[taps_.size() - 1 - i]) > 1e-12 * scale)
          throw ConfigurationError("zero-phase FIR taps are not symmetric");
    }
  }

  const std::vector<double>& taps() const { return taps_; }
  int forward_shift() const { return shift_; }
  bool zero_phase() const { return zero_phase_; }
  int order() const { return static_cast<int>(taps_.size()) - 1; }
  double dc_gain() const { return poly_sum(taps_); }

  Complex response(double omega) const {
    return poly_eval(std::span<const double>(taps_), omega) * std::polar(1.0, omega * shift_);
  }

  /// The causal part as a transfer function (forward shift dropped).
  TransferFunction causal(double sample_time) const { return {taps_, {1.0}, 0, sample_time}; }

 private:
  std::vector<double> taps_;
  int shift_;
  bool zero_phase_;
};

/// Streaming direct-form II transposed realization. Single owner.
class IirFilter {
 public:
  explicit IirFilter(const TransferFunction& tf) {
    const auto num = tf.expanded_numerator();
    b_.assign(num.begin(), num.end());
    a_.assign(tf.denominator().begin(), tf.denominator().end());
    const std::size_t n = std::max(b_.size(), a_.size());
    b_.resize(n, 0.0);
    a_.resize(n, 0.0);
    z_.assign(n - 1, 0.0L);
  }

  // State and products are carried in long double: inverse-plant filters
  // have large alternating coefficients, and double roundoff there leaves
  // a ~1e-8 aperiodic floor in converged repetitive loops.
  double step(double x) {
    const long double xl = x;
    const long double y = b_[0] * xl + (z_.empty() ? 0.0L : z_[0]);
    const std::size_t n = z_.size();
    for (std::size_t i = 0; i + 1 < n; ++i) z_[i] = b_[i + 1] * xl - a_[i + 1] * y + z_[i + 1];
    if (n > 0) z_[n - 1] = b_[n] * xl - a_[n] * y;
    return static_cast<double>(y);
  }

  void reset() { std::fill(z_.begin(), z_.end(), 0.0L); }
  std::vector<double> state() const { return {z_.begin(), z_.end()}; }
  void set_state(std::span<const double> s) {
    if (s.size() != z_.size()) throw ConfigurationError("IirFilter: state size mismatch");
    std::copy(s.begin(), s.end(), z_.begin());
  }

 private:
  std::vector<long double> b_;
  std::vector<long double> a_;
  std::vector<long double> z_;
};

/// Filter a finite record with zero (or given) initial state. An unstable
/// denominator is reported through `warn`, not rejected.
inline std::vector<double> filter_stream(const TransferFunction& tf, std::span<const double> input,
                                         std::optional<std::span<const double>> initial_state = std::nullopt,
                                         const WarningSink& warn = stderr_warnings()) {
  if (!tf.is_stable()) warn("filter_stream: denominator is not strictly stable; output may diverge");
  IirFilter filter(tf);
  if (initial_state) filter.set_state(*initial_state);
  std::vector<double> out;
  out.reserve(input.size());
  for (double x : input) out.push_back(filter.step(x));
  return out;
}

/// y[k] = sum_j taps[j] * x[k + shift - j]. Outside the record the input is
/// zero unless `wrap_length` is given, in which case indices wrap modulo N.
inline std::vector<double> apply_fir_zero_phase(const FirKernel& kernel, std::span<const double> input,
                                                std::optional<std::size_t> wrap_length = std::nullopt) {
  const auto n = static_cast<long>(input.size());
  if (wrap_length && *wrap_length != input.size())
    throw ConfigurationError("apply_fir_zero_phase: input length must equal wrap_length");
  const auto& taps = kernel.taps();
  std::vector<double> out(input.size(), 0.0);
  for (long k = 0; k < n; ++k) {
    double acc = 0.0;
    for (long j = 0; j < static_cast<long>(taps.size()); ++j) {
      long idx = k + kernel.forward_shift() - j;
      if (wrap_length) {
        idx %= n;
        if (idx < 0) idx += n;
      } else if (idx < 0 || idx >= n) {
        continue;
      }
      acc += taps[j] * input[idx];
    }
    out[k] = acc;
  }
  return out;
}

/// Fixed-capacity FIFO: step() returns the sample pushed `capacity` steps
/// earlier (zero during warm-up).
class DelayLine {
 public:
  explicit DelayLine(int capacity) {
    if (capacity <= 0) throw ConfigurationError("delay line capacity must be positive");
    buffer_.assign(static_cast<std::size_t>(capacity), 0.0);
  }

  double step(double sample) {
    const double out = buffer_[head_];
    buffer_[head_] = sample;
    head_ = (head_ + 1) % buffer_.size();
    return out;
  }

  /// The value the next step() will return.
  double oldest() const { return buffer_[head_]; }
  int capacity() const { return static_cast<int>(buffer_.size()); }

  /// Oldest first.
  std::vector<double> contents() const {
    std::vector<double> out;
    out.reserve(buffer_.size());
    for (std::size_t i = 0; i < buffer_.size(); ++i) out.push_back(buffer_[(head_ + i) % buffer_.size()]);
    return out;
  }

 private:
  std::vector<double> buffer_;
  std::size_t head_ = 0;
};

}  // namespace ventrc
