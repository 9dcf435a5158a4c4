#pragma once

// Closed-loop FRF identification of the complementary sensitivity and
// parametric fitting of the averaged FRF.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ventrc/errors.hpp"
#include "ventrc/lti.hpp"
#include "ventrc/plant.hpp"

namespace ventrc {

class IdentificationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Periodic random-phase multisine exciting a set of DFT bins of one period.
struct MultisineSpec {
  int period_samples = 2000;
  std::vector<int> bins;  // in [1, period_samples / 2]
  double rms = 1.0;       // mbar
  int discard_periods = 5;
  int record_periods = 10;
  std::uint64_t seed = 1;
  double measurement_noise_std = 0.0;  // mbar, additive on the measurement

  /// Every bin from the fundamental up to Nyquist.
  static MultisineSpec full_band(int period_samples = 2000) {
    MultisineSpec s;
    s.period_samples = period_samples;
    s.bins.resize(static_cast<std::size_t>(period_samples / 2));
    std::iota(s.bins.begin(), s.bins.end(), 1);
    return s;
  }

  /// `count` log-spaced frequencies in [f_lo, f_hi] snapped to distinct bins.
  static MultisineSpec log_spaced(double f_lo, double f_hi, int count, double sample_time,
                                  int period_samples = 2000) {
    if (!(f_lo > 0.0) || !(f_hi > f_lo) || count < 1)
      throw ConfigurationError("log_spaced multisine: need 0 < f_lo < f_hi and count >= 1");
    MultisineSpec s;
    s.period_samples = period_samples;
    const double resolution = 1.0 / (period_samples * sample_time);
    for (int i = 0; i < count; ++i) {
      const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
      const double f = f_lo * std::pow(f_hi / f_lo, t);
      const int bin = std::clamp(static_cast<int>(std::lround(f / resolution)), 1, period_samples / 2);
      if (s.bins.empty() || bin > s.bins.back()) s.bins.push_back(bin);
    }
    return s;
  }

  void validate() const {
    if (period_samples < 2) throw ConfigurationError("multisine: period must be at least 2 samples");
    if (bins.empty() || !(rms > 0.0)) throw DomainError("multisine: degenerate excitation (no bins or zero amplitude)");
    for (std::size_t i = 0; i < bins.size(); ++i) {
      if (bins[i] < 1 || bins[i] > period_samples / 2) throw ConfigurationError("multisine: bin out of range");
      if (i > 0 && bins[i] <= bins[i - 1]) throw ConfigurationError("multisine: bins must be strictly increasing");
    }
    if (discard_periods < 0 || record_periods < 1) throw ConfigurationError("multisine: invalid period counts");
  }
};

/// One period of the excitation, scaled to the requested RMS.
inline std::vector<double> multisine_period(const MultisineSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  const int n = spec.period_samples;
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  for (int bin : spec.bins) {
    // The Nyquist bin only carries a cosine; fix its phase so it has energy.
    const double phi = (2 * bin == n) ? 0.0 : phase(rng);
    for (int k = 0; k < n; ++k) x[k] += std::cos(2.0 * kPi * bin * k / n + phi);
  }
  const double power = std::inner_product(x.begin(), x.end(), x.begin(), 0.0) / n;
  const double scale = spec.rms / std::sqrt(power);
  for (double& v : x) v *= scale;
  return x;
}

namespace detail {

inline Complex dft_bin(std::span<const double> period, int bin) {
  const auto n = static_cast<double>(period.size());
  Complex acc{};
  for (std::size_t k = 0; k < period.size(); ++k)
    acc += period[k] * std::polar(1.0, -2.0 * kPi * bin * static_cast<double>(k) / n);
  return acc;
}

}  // namespace detail

/// Estimate T = PC/(1+PC) from reference to measured airway pressure with
/// the loop running around `operating_pressure`.
inline FrequencyResponse estimate_frf(PlantSimulator plant, const TransferFunction& controller,
                                      double operating_pressure, const MultisineSpec& excitation) {
  excitation.validate();
  if (!plant.strictly_proper())
    throw ConfigurationError("estimate_frf: plant must not have direct feedthrough inside the loop");
  const double ts = plant.circuit().sample_time;
  controller.require_same_rate(TransferFunction::gain(1.0, ts));

  const auto x = multisine_period(excitation);
  const int n = excitation.period_samples;
  const double peak = std::abs(*std::max_element(x.begin(), x.end(), [](double a, double b) {
    return std::abs(a) < std::abs(b);
  }));
  const double bound = 10.0 * peak;

  IirFilter ctrl(controller);
  std::mt19937_64 noise_rng(excitation.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, excitation.measurement_noise_std);

  std::vector<double> r_avg(static_cast<std::size_t>(n), 0.0);
  std::vector<double> y_avg(static_cast<std::size_t>(n), 0.0);
  const long total = static_cast<long>(excitation.discard_periods + excitation.record_periods) * n;
  const long record_start = static_cast<long>(excitation.discard_periods) * n;
  for (long k = 0; k < total; ++k) {
    const double r = operating_pressure + x[static_cast<std::size_t>(k % n)];
    double y = plant.measured();
    if (excitation.measurement_noise_std > 0.0) y += noise(noise_rng);
    if (!std::isfinite(y) || std::abs(y) > 1e6)
      throw IdentificationError("estimate_frf: output diverged during excitation, loop unstable");
    const double u = ctrl.step(r - y);
    plant.step(u);
    if (k >= record_start) {
      if (std::abs(y - operating_pressure) > bound) {
        std::ostringstream msg;
        msg << "estimate_frf: output deviates " << std::abs(y - operating_pressure)
            << " mbar from the operating point (bound " << bound << "); loop unstable, identification aborted";
        throw IdentificationError(msg.str());
      }
      r_avg[static_cast<std::size_t>(k % n)] += r;
      y_avg[static_cast<std::size_t>(k % n)] += y;
    }
  }
  for (auto* v : {&r_avg, &y_avg})
    for (double& s : *v) s /= excitation.record_periods;

  std::vector<double> freqs;
  std::vector<Complex> values;
  for (int bin : excitation.bins) {
    freqs.push_back(bin / (n * ts));
    values.push_back(detail::dft_bin(y_avg, bin) / detail::dft_bin(r_avg, bin));
  }
  return {std::move(freqs), std::move(values), ts};
}

/// The bins of `frf` with lo_hz <= f <= hi_hz.
inline FrequencyResponse restrict_band(const FrequencyResponse& frf, double lo_hz, double hi_hz) {
  std::vector<double> f;
  std::vector<Complex> v;
  for (std::size_t i = 0; i < frf.size(); ++i) {
    if (frf.frequencies_hz()[i] < lo_hz || frf.frequencies_hz()[i] > hi_hz) continue;
    f.push_back(frf.frequencies_hz()[i]);
    v.push_back(frf.values()[i]);
  }
  if (f.empty()) throw DomainError("restrict_band: no bins in the band");
  return {std::move(f), std::move(v), frf.sample_time()};
}

/// Bin-wise complex mean.
inline FrequencyResponse average_frf(std::span<const FrequencyResponse> responses) {
  if (responses.empty()) throw ConfigurationError("average_frf: no responses");
  const auto& first = responses.front();
  std::vector<Complex> sum(first.size(), Complex{});
  for (const auto& r : responses) {
    if (!r.same_grid(first)) throw ConfigurationError("average_frf: frequency grids differ");
    for (std::size_t i = 0; i < r.size(); ++i) sum[i] += r.values()[i];
  }
  for (auto& v : sum) v /= static_cast<double>(responses.size());
  return {first.frequencies_hz(), std::move(sum), first.sample_time()};
}

/// 1/|H| per bin, turning the fit into a relative-error fit.
inline std::vector<double> relative_weights(const FrequencyResponse& frf) {
  std::vector<double> w;
  w.reserve(frf.size());
  for (const auto& v : frf.values()) {
    if (std::abs(v) == 0.0) throw DomainError("relative_weights: FRF has a zero bin");
    w.push_back(1.0 / std::abs(v));
  }
  return w;
}

struct FitOptions {
  int max_iterations = 50;
  double tolerance = 1e-8;  // relative parameter change
  std::vector<double> weights;  // empty: uniform
};

struct FitResult {
  TransferFunction tf;
  int iterations = 0;
  bool converged = false;
  bool poles_reflected = false;
  std::vector<double> residual_history;  // weighted squared error per accepted iterate
  double residual = 0.0;                 // of the returned model
};

namespace detail {

struct RationalModel {
  std::vector<double> b;  // order + 1
  std::vector<double> a;  // order + 1, a[0] = 1
};

inline double fit_residual(const RationalModel& m, std::span<const double> omega, std::span<const Complex> h,
                           std::span<const double> w) {
  double j = 0.0;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    const Complex model = poly_eval(std::span<const double>(m.b), omega[i]) / poly_eval(std::span<const double>(m.a), omega[i]);
    j += w[i] * w[i] * std::norm(h[i] - model);
  }
  return j;
}

inline Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-13);
  if (qr.rank() < x.cols())
    throw NumericalError("fit_rational: singular normal equations; try a lower order");
  return qr.solve(y);
}

// Weighted linear least squares for the numerator with the denominator held.
inline std::vector<double> fit_numerator(std::span<const double> a, int order, std::span<const double> omega,
                                         std::span<const Complex> h, std::span<const double> w) {
  const auto m = static_cast<Eigen::Index>(omega.size());
  Eigen::MatrixXd x(2 * m, order + 1);
  Eigen::VectorXd y(2 * m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Complex scale = w[i] / poly_eval(a, omega[i]);
    for (int k = 0; k <= order; ++k) {
      const Complex e = scale * std::polar(1.0, -omega[i] * k);
      x(i, k) = e.real();
      x(m + i, k) = e.imag();
    }
    const Complex target = w[i] * h[i];
    y(i) = target.real();
    y(m + i) = target.imag();
  }
  const Eigen::VectorXd sol = solve_least_squares(x, y);
  return {sol.data(), sol.data() + sol.size()};
}

}  // namespace detail

/// Fit z^-delay B(z^-1)/A(z^-1) with deg B = deg A = order to an FRF.
///
/// Sanathanan-Koerner iterations: each pass solves the linearized problem
/// min sum |w (B - H A) / A_prev|^2. A pass is accepted only if the true
/// weighted error sum |w (H - B/A)|^2 does not increase; otherwise the step
/// is halved, and iteration stops when no decrease can be found. Unstable
/// poles of the final model are reflected into the unit disk and the
/// numerator refit.
inline FitResult fit_rational(const FrequencyResponse& frf, int order, int fixed_delay_samples,
                              const FitOptions& options = {}, const WarningSink& warn = stderr_warnings()) {
  if (order < 0) throw ConfigurationError("fit_rational: order must be >= 0");
  if (fixed_delay_samples < 0) throw ConfigurationError("fit_rational: delay must be >= 0");
  const std::size_t m = frf.size();
  const std::size_t unknowns = 2 * static_cast<std::size_t>(order) + 1;
  if (2 * m < unknowns) throw ConfigurationError("fit_rational: too few frequency bins for the order");
  if (!options.weights.empty() && options.weights.size() != m)
    throw ConfigurationError("fit_rational: weight count differs from FRF size");

  std::vector<double> omega(m), w(m, 1.0);
  std::vector<Complex> h(m);
  for (std::size_t i = 0; i < m; ++i) {
    omega[i] = frf.omega(i);
    h[i] = frf.values()[i] * std::polar(1.0, omega[i] * fixed_delay_samples);
    if (!options.weights.empty()) w[i] = options.weights[i];
  }

  auto unpack = [order](const Eigen::VectorXd& theta) {
    detail::RationalModel model;
    model.b.assign(theta.data(), theta.data() + order + 1);
    model.a.assign(static_cast<std::size_t>(order) + 1, 1.0);
    for (int k = 1; k <= order; ++k) model.a[k] = theta(order + k);
    return model;
  };

  const auto rows = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd x(2 * rows, static_cast<Eigen::Index>(unknowns));
  Eigen::VectorXd y(2 * rows);
  Eigen::VectorXd theta;
  detail::RationalModel current;
  double j_current = 0.0;
  FitResult result{TransferFunction::gain(0.0, frf.sample_time()), 0, false, false, {}, 0.0};

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Complex scale = iter == 0 ? Complex{w[i], 0.0} : w[i] / poly_eval(std::span<const double>(current.a), omega[i]);
      for (int k = 0; k <= order; ++k) {
        const Complex e = scale * std::polar(1.0, -omega[i] * k);
        x(i, k) = e.real();
        x(rows + i, k) = e.imag();
        if (k > 0) {
          const Complex f = -e * h[i];
          x(i, order + k) = f.real();
          x(rows + i, order + k) = f.imag();
        }
      }
      const Complex target = scale * h[i];
      y(i) = target.real();
      y(rows + i) = target.imag();
    }
    const Eigen::VectorXd proposal = detail::solve_least_squares(x, y);

    if (iter == 0) {
      theta = proposal;
      current = unpack(theta);
      j_current = detail::fit_residual(current, omega, h, w);
      result.residual_history.push_back(j_current);
      result.iterations = 1;
      if (order == 0) {
        result.converged = true;
        break;
      }
      continue;
    }

    // Backtrack along the SK step until the true error does not increase.
    const Eigen::VectorXd step = proposal - theta;
    double alpha = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 30; ++halving, alpha *= 0.5) {
      const Eigen::VectorXd candidate = theta + alpha * step;
      const auto model = unpack(candidate);
      const double j = detail::fit_residual(model, omega, h, w);
      if (j <= j_current) {
        theta = candidate;
        current = model;
        j_current = j;
        accepted = true;
        break;
      }
    }
    result.iterations = iter + 1;
    const double change = accepted ? (alpha * step).norm() : 0.0;
    if (accepted) result.residual_history.push_back(j_current);
    if (!accepted || change <= options.tolerance * std::max(theta.norm(), 1e-300)) {
      result.converged = true;
      break;
    }
  }
  if (!result.converged)
    warn("fit_rational: no convergence after " + std::to_string(options.max_iterations) +
         " iterations; returning the best iterate");

  // Stability: reflect poles with |p| >= 1.
  if (order > 0) {
    auto poles = poly_roots(current.a);
    bool reflected = false;
    for (auto& p : poles) {
      if (std::abs(p) >= 1.0) {
        p = 1.0 / std::conj(p);
        if (std::abs(p) >= 1.0 - 1e-9) p *= (1.0 - 1e-6);
        reflected = true;
      }
    }
    if (reflected) {
      current.a = poly_from_roots(poles);
      current.b = detail::fit_numerator(current.a, order, omega, h, w);
      result.poles_reflected = true;
      warn("fit_rational: unstable poles reflected into the unit circle and numerator refit");
    }
  }
  result.residual = detail::fit_residual(current, omega, h, w);
  result.tf = TransferFunction(current.b, current.a, fixed_delay_samples, frf.sample_time());
  return result;
}

/// Delay (in samples) from the least-squares slope of the unwrapped phase
/// against omega over [band_lo_hz, band_hi_hz].
inline int estimate_delay(const FrequencyResponse& frf, double band_lo_hz, double band_hi_hz) {
  std::vector<double> omega, phase;
  for (std::size_t i = 0; i < frf.size(); ++i) {
    const double f = frf.frequencies_hz()[i];
    if (f < band_lo_hz || f > band_hi_hz) continue;
    double ph = std::arg(frf.values()[i]);
    if (!phase.empty()) {
      while (ph - phase.back() > kPi) ph -= 2.0 * kPi;
      while (ph - phase.back() < -kPi) ph += 2.0 * kPi;
    }
    omega.push_back(frf.omega(i));
    phase.push_back(ph);
  }
  if (omega.size() < 3) throw DomainError("estimate_delay: fewer than 3 bins in the band");
  const double n = static_cast<double>(omega.size());
  const double mw = std::accumulate(omega.begin(), omega.end(), 0.0) / n;
  const double mp = std::accumulate(phase.begin(), phase.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    sxy += (omega[i] - mw) * (phase[i] - mp);
    sxx += (omega[i] - mw) * (omega[i] - mw);
  }
  return static_cast<int>(std::lround(-sxy / sxx));
}

}  // namespace ventrc
