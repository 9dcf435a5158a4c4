#pragma once

// Repetitive-controller filter synthesis.
//
//   R = L z^-N Q (1 - z^-N Q)^-1,  L = z^{l_shift} L_c,  Q = z^{p_q} Q_c
//
// L_c comes from a ZPETC inversion of the fitted complementary sensitivity,
// Q_c is a symmetric windowed-sinc lowpass. The loop is stable for every
// period N when |Q (1 - T L)| < 1 on the whole unit circle; the check is
// run against each measured FRF.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ventrc/errors.hpp"
#include "ventrc/io.hpp"
#include "ventrc/lti.hpp"
#include "ventrc/sysid.hpp"

namespace ventrc {

class DesignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RcFilterSet {
  TransferFunction l_causal;
  int l_shift = 0;
  FirKernel q_kernel;
  int period_n = 0;

  double sample_time() const { return l_causal.sample_time(); }

  /// Length of the memory-loop delay line after absorbing both forward shifts.
  int memory_length() const { return period_n - l_shift - q_kernel.forward_shift(); }

  void validate() const {
    if (period_n <= 0) throw ConfigurationError("filter set: period_n must be positive");
    if (l_shift < 0) throw ConfigurationError("filter set: l_shift must be >= 0");
    if (memory_length() <= 0)
      throw ConfigurationError("filter set: shift budget violated, l_shift + q_shift = " +
                               std::to_string(l_shift + q_kernel.forward_shift()) + " must be < N = " +
                               std::to_string(period_n));
    if (!q_kernel.zero_phase()) throw ConfigurationError("filter set: Q kernel must be zero-phase");
    if (std::abs(q_kernel.dc_gain() - 1.0) > 1e-2)
      throw ConfigurationError("filter set: Q kernel DC gain must be within 1% of 1");
  }
};

struct ZpetcResult {
  TransferFunction l_causal;
  int l_shift = 0;
  int relative_degree = 0;  // leading zero numerator coefficients of T_fit
  int unstable_zeros = 0;   // zeros routed to the phase-cancelled factor
  // The same T_fit and L = z^{l_shift} L_c from the computed roots. Their
  // product cancels factor by factor; use these when T L itself matters.
  ZeroPoleGain t_factored;
  ZeroPoleGain l_factored;
};

/// Zero-phase-error tracking inverse of t_fit.
///
/// With t_fit = z^-(d+p) b0 B+(z^-1) B-(z^-1) / A(z^-1), B+ holding the zeros
/// strictly inside |z| < 1 - 1e-9 and B- the rest (both monic),
///   L_c     = A B-* / (b0 B+ B-(1)^2),   B-* = B- with reversed coefficients
///   l_shift = d + p + deg B-
/// so that T_fit z^{l_shift} L_c = |B-(e^-iw)|^2 / B-(1)^2, real and
/// nonnegative, equal to 1 at DC.
inline ZpetcResult zpetc_invert(const TransferFunction& t_fit) {
  const auto& num = t_fit.numerator();
  double scale = 0.0;
  for (double c : num) scale = std::max(scale, std::abs(c));
  if (scale == 0.0) throw DomainError("zpetc_invert: numerator is identically zero");

  std::size_t first = 0;
  while (first < num.size() && std::abs(num[first]) <= 1e-12 * scale) ++first;
  std::vector<double> reduced(num.begin() + static_cast<long>(first), num.end());
  while (reduced.size() > 1 && reduced.back() == 0.0) reduced.pop_back();
  const double lead = reduced.front();

  std::vector<Complex> stable, unstable;
  for (const Complex& r : poly_roots(reduced)) (std::abs(r) < 1.0 - 1e-9 ? stable : unstable).push_back(r);

  const auto b_plus = poly_from_roots(stable);
  const auto b_minus = poly_from_roots(unstable);
  const double b_minus_at_one = poly_sum(b_minus);
  if (std::abs(b_minus_at_one) < 1e-12)
    throw DomainError("zpetc_invert: non-minimum-phase factor vanishes at z = 1 (zero at DC); treat manually");
  const std::vector<double> b_minus_rev(b_minus.rbegin(), b_minus.rend());

  auto l_num = poly_multiply(t_fit.denominator(), b_minus_rev);
  const double gain = 1.0 / (lead * b_minus_at_one * b_minus_at_one);
  for (double& c : l_num) c *= gain;

  ZpetcResult out{TransferFunction(std::move(l_num), b_plus, 0, t_fit.sample_time()), 0, 0, 0, {}, {}};
  out.relative_degree = static_cast<int>(first);
  out.unstable_zeros = static_cast<int>(unstable.size());
  out.l_shift = t_fit.pure_delay() + out.relative_degree + out.unstable_zeros;

  const auto poles = poly_roots(t_fit.denominator());
  const double a0 = t_fit.denominator().front();
  std::vector<Complex> all_zeros = stable;
  all_zeros.insert(all_zeros.end(), unstable.begin(), unstable.end());
  out.t_factored = {all_zeros, poles, lead / a0, t_fit.pure_delay() + out.relative_degree};

  // B-*(z^-1) = prod(z^-1 - r) = prod(-r) prod(1 - z^-1 / r)
  Complex reversed_gain = 1.0;
  Complex minus_at_one = 1.0;
  std::vector<Complex> l_zeros = poles;
  for (const Complex& r : unstable) {
    reversed_gain *= -r;
    minus_at_one *= 1.0 - r;
    l_zeros.push_back(1.0 / r);
  }
  const double l_gain = a0 * reversed_gain.real() / (lead * minus_at_one.real() * minus_at_one.real());
  out.l_factored = {std::move(l_zeros), stable, l_gain, -out.l_shift};
  return out;
}

/// Hamming-windowed sinc lowpass with order + 1 symmetric taps and
/// forward shift order / 2. Taps are normalized to unit DC gain; if the
/// passband ripple then rises above 1 + 1e-6 anywhere, the taps are scaled
/// down so that max |Q| = 1.
inline FirKernel design_q_fir(double cutoff_hz, int order, double sample_time) {
  detail::require_sample_time(sample_time);
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < nyquist_hz(sample_time)))
    throw DomainError("design_q_fir: cutoff must lie in (0, Nyquist)");
  if (order < 0 || order % 2 != 0) throw ConfigurationError("design_q_fir: order must be even and >= 0");

  const double fc = cutoff_hz * sample_time;  // cycles/sample
  const int half = order / 2;
  std::vector<double> taps(static_cast<std::size_t>(order) + 1);
  for (int n = 0; n <= order; ++n) {
    const double m = n - half;
    const double sinc = m == 0 ? 2.0 * fc : std::sin(2.0 * kPi * fc * m) / (kPi * m);
    const double window = order == 0 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * kPi * n / order);
    taps[n] = sinc * window;
  }
  // Exact symmetry, then unit DC gain.
  for (int n = 0; n < half; ++n) taps[order - n] = taps[n];
  const double sum = poly_sum(taps);
  for (double& t : taps) t /= sum;

  FirKernel kernel(taps, half, true);
  double peak = 0.0;
  constexpr int kGrid = 8192;
  for (int i = 0; i <= kGrid; ++i) peak = std::max(peak, std::abs(kernel.response(kPi * i / kGrid)));
  if (peak > 1.0 + 1e-6) {
    for (double& t : taps) t /= peak;
    kernel = FirKernel(taps, half, true);
  }
  return kernel;
}

/// Identity robustness filter (Q = 1).
inline FirKernel unit_q() { return FirKernel({1.0}, 0, true); }

/// Evaluation grid for analytic stability plots: 1000 linear points up to
/// Nyquist plus 200 log points in [0.1, 50] Hz.
inline std::vector<double> stability_grid(double sample_time) {
  const double nyq = nyquist_hz(sample_time);
  std::vector<double> f;
  for (int i = 1; i <= 1000; ++i) f.push_back(nyq * i / 1000.0);
  const double hi = std::min(50.0, nyq);
  for (int i = 0; i < 200; ++i) f.push_back(0.1 * std::pow(hi / 0.1, i / 199.0));
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }), f.end());
  return f;
}

/// L(e^{iw}) = e^{i w l_shift} L_c(e^{iw}).
inline Complex learning_response(const TransferFunction& l_causal, int l_shift, double omega) {
  return l_causal.response(omega) * std::polar(1.0, omega * l_shift);
}

struct StabilityReport {
  std::vector<double> frequencies_hz;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> magnitudes;  // [frf][bin] of |Q (1 - T L)|
  std::vector<double> frf_max;
  double overall_max = 0.0;
  bool pass = false;  // overall_max < 1
  double margin = 0.0;  // 1 - overall_max
};

inline StabilityReport check_stability(const FirKernel& q, const TransferFunction& l_causal, int l_shift,
                                       std::span<const FrequencyResponse> frfs,
                                       std::vector<std::string> labels = {},
                                       const WarningSink& warn = stderr_warnings()) {
  if (frfs.empty()) throw ConfigurationError("check_stability: no FRFs");
  const auto& grid = frfs.front();
  for (const auto& f : frfs)
    if (!f.same_grid(grid)) throw ConfigurationError("check_stability: FRFs must share one grid");
  l_causal.require_same_rate(TransferFunction::gain(1.0, grid.sample_time()));
  if (labels.empty())
    for (std::size_t i = 0; i < frfs.size(); ++i) labels.push_back("frf" + std::to_string(i + 1));
  if (labels.size() != frfs.size()) throw ConfigurationError("check_stability: label count differs from FRF count");

  const double nyq = nyquist_hz(grid.sample_time());
  if (grid.empty() || grid.frequencies_hz().back() < nyq * (1.0 - 1e-9))
    warn("check_stability: grid does not reach Nyquist; the condition is only verified on the grid");
  if (grid.size() < 400) warn("check_stability: fewer than 400 grid points");

  StabilityReport report;
  report.frequencies_hz = grid.frequencies_hz();
  report.labels = std::move(labels);
  std::vector<Complex> ql(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w = grid.omega(i);
    ql[i] = q.response(w) * learning_response(l_causal, l_shift, w);
  }
  const std::vector<Complex> qr = [&] {
    std::vector<Complex> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] = q.response(grid.omega(i));
    return v;
  }();
  for (const auto& frf : frfs) {
    std::vector<double> mag(frf.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < frf.size(); ++i) {
      mag[i] = std::abs(qr[i] - ql[i] * frf.values()[i]);
      peak = std::max(peak, mag[i]);
    }
    report.magnitudes.push_back(std::move(mag));
    report.frf_max.push_back(peak);
    report.overall_max = std::max(report.overall_max, peak);
  }
  report.pass = report.overall_max < 1.0;
  report.margin = 1.0 - report.overall_max;
  return report;
}

struct ModifyingSensitivity {
  FrequencyResponse values;
  std::vector<std::size_t> flagged_bins;  // near-marginal, value set to infinity
};

/// S_R = (1 - z^-N Q) (1 - (1 - T L) z^-N Q)^-1 on the grid of `t`.
inline ModifyingSensitivity compute_modifying_sensitivity(const FirKernel& q, const TransferFunction& l_causal,
                                                          int l_shift, const FrequencyResponse& t, int period_n) {
  if (period_n <= 0) throw ConfigurationError("modifying sensitivity: period_n must be positive");
  std::vector<Complex> s(t.size());
  std::vector<std::size_t> flagged;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double w = t.omega(i);
    const Complex memory = std::polar(1.0, -w * period_n) * q.response(w);
    const Complex den = 1.0 - (1.0 - t.values()[i] * learning_response(l_causal, l_shift, w)) * memory;
    if (std::abs(den) < 1e-12) {
      flagged.push_back(i);
      s[i] = Complex{std::numeric_limits<double>::infinity(), 0.0};
    } else {
      s[i] = (1.0 - memory) / den;
    }
  }
  return {FrequencyResponse(t.frequencies_hz(), std::move(s), t.sample_time()), std::move(flagged)};
}

struct DesignOptions {
  int order = 4;
  int delay = 12;
  double cutoff_hz = 23.0;
  int q_order = 50;
  int period_n = 2000;
  double min_margin = 0.05;
  bool relative_weighting = false;  // 1/|H| weights instead of uniform
  double fit_band_hz = 40.0;        // fit bins up to this frequency; 0 uses the whole grid
  FitOptions fit;
};

struct DesignResult {
  RcFilterSet filters;
  StabilityReport report;
  FitResult fit;
  ZpetcResult zpetc;
};

/// fit -> ZPETC -> Q design -> stability check, without judging the result.
inline DesignResult design_filters(std::span<const FrequencyResponse> frfs, const FrequencyResponse& mean_frf,
                                   const DesignOptions& options, std::vector<std::string> labels = {},
                                   const WarningSink& warn = stderr_warnings()) {
  const FrequencyResponse fit_data =
      options.fit_band_hz > 0.0 ? restrict_band(mean_frf, 0.0, options.fit_band_hz) : mean_frf;
  FitOptions fit_options = options.fit;
  if (options.relative_weighting && fit_options.weights.empty()) fit_options.weights = relative_weights(fit_data);
  FitResult fit = fit_rational(fit_data, options.order, options.delay, fit_options, warn);
  ZpetcResult zpetc = zpetc_invert(fit.tf);
  FirKernel q = design_q_fir(options.cutoff_hz, options.q_order, mean_frf.sample_time());
  RcFilterSet filters{zpetc.l_causal, zpetc.l_shift, q, options.period_n};
  filters.validate();
  StabilityReport report = check_stability(q, zpetc.l_causal, zpetc.l_shift, frfs, std::move(labels), warn);
  return {std::move(filters), std::move(report), std::move(fit), std::move(zpetc)};
}

/// design_filters() that fails loudly unless every FRF passes with at least
/// options.min_margin.
inline DesignResult design_pipeline(std::span<const FrequencyResponse> frfs, const FrequencyResponse& mean_frf,
                                    const DesignOptions& options, std::vector<std::string> labels = {},
                                    const WarningSink& warn = stderr_warnings()) {
  DesignResult result = design_filters(frfs, mean_frf, options, std::move(labels), warn);
  if (!result.report.pass || result.report.margin < options.min_margin) {
    throw DesignError("design_pipeline: stability check failed (max |Q(1-TL)| = " +
                      io::format_double(result.report.overall_max) + ", required margin " +
                      io::format_double(options.min_margin) + ")");
  }
  return result;
}

/// Largest Q cutoff (within `tolerance` Hz) in [lo_hz, hi_hz] for which the
/// stability check still passes, by bisection. Returns lo_hz if even lo_hz
/// fails and hi_hz if hi_hz passes.
inline double highest_stable_cutoff(const TransferFunction& l_causal, int l_shift, int q_order,
                                    std::span<const FrequencyResponse> frfs, double lo_hz, double hi_hz,
                                    double tolerance = 0.05) {
  const double ts = frfs.front().sample_time();
  auto passes = [&](double cutoff) {
    return check_stability(design_q_fir(cutoff, q_order, ts), l_causal, l_shift, frfs, {}, ignore_warnings()).pass;
  };
  if (!passes(lo_hz)) return lo_hz;
  if (passes(hi_hz)) return hi_hz;
  while (hi_hz - lo_hz > tolerance) {
    const double mid = 0.5 * (lo_hz + hi_hz);
    (passes(mid) ? lo_hz : hi_hz) = mid;
  }
  return lo_hz;
}

// Filter-set file: one [filterset] header line of key=value pairs, then
// [l_numerator], [l_denominator] and [q_taps] sections with one
// coefficient per line.
inline void write_filterset(const std::filesystem::path& path, const RcFilterSet& set) {
  auto out = io::open_for_write(path);
  out << "[filterset]\n"
      << "sample_time=" << set.sample_time() << " period_n=" << set.period_n << " l_shift=" << set.l_shift
      << " q_shift=" << set.q_kernel.forward_shift() << '\n';
  out << "[l_numerator]\n";
  for (double c : set.l_causal.numerator()) out << c << '\n';
  out << "[l_denominator]\n";
  for (double c : set.l_causal.denominator()) out << c << '\n';
  out << "[q_taps]\n";
  for (double c : set.q_kernel.taps()) out << c << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

inline RcFilterSet read_filterset(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  const std::string ctx = path.string();
  std::map<std::string, std::vector<std::string>> sections;
  std::string current;
  for (const auto& raw : lines) {
    const std::string line = io::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      current = line.substr(1, line.size() - 2);
      sections[current];
      continue;
    }
    if (current.empty()) throw ConfigurationError(ctx + ": content before first section");
    sections[current].push_back(line);
  }
  for (const char* name : {"filterset", "l_numerator", "l_denominator", "q_taps"})
    if (!sections.contains(name)) throw ConfigurationError(ctx + ": missing section [" + name + "]");
  if (sections["filterset"].size() != 1) throw ConfigurationError(ctx + ": [filterset] must hold one line");
  const auto h = io::parse_header(sections["filterset"].front(), ctx);
  const double ts = io::parse_double(io::header_value(h, "sample_time", ctx), ctx);
  const int n = io::parse_int(io::header_value(h, "period_n", ctx), ctx);
  const int l_shift = io::parse_int(io::header_value(h, "l_shift", ctx), ctx);
  const int q_shift = io::parse_int(io::header_value(h, "q_shift", ctx), ctx);
  auto coeffs = [&](const char* name) {
    const auto& s = sections[name];
    return io::parse_coefficients(s, 0, s.size(), ctx);
  };
  RcFilterSet set{TransferFunction(coeffs("l_numerator"), coeffs("l_denominator"), 0, ts), l_shift,
                  FirKernel(coeffs("q_taps"), q_shift, true), n};
  set.validate();
  return set;
}

inline void write_stability_csv(const std::filesystem::path& path, const StabilityReport& report) {
  auto out = io::open_for_write(path);
  out << "frequency_hz";
  for (const auto& l : report.labels) out << ',' << l;
  out << '\n';
  for (std::size_t i = 0; i < report.frequencies_hz.size(); ++i) {
    out << report.frequencies_hz[i];
    for (const auto& m : report.magnitudes) out << ',' << m[i];
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace ventrc
