#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "ventrc/control_rt.hpp"

using namespace ventrc;

namespace {

constexpr double kTs = 2e-3;

RcFilterSet trivial_set(int n) {
  return {TransferFunction::gain(1.0, kTs), 0, unit_q(), n};
}

// A filter set shaped like the designed one: stable IIR L with a forward
// shift and a centred FIR Q.
RcFilterSet realistic_set(int n) {
  const TransferFunction l({3.0, -4.2, 1.3}, {1.0, -0.8, 0.1}, 0, kTs);
  return {l, 14, design_q_fir(23.0, 50, kTs), n};
}

// Offline R = z^{l_shift} L_c z^{-N} z^{p_q} Q_c / (1 - z^{-N} z^{p_q} Q_c)
// built from lti primitives.
TransferFunction offline_r(const RcFilterSet& set) {
  const auto& taps = set.q_kernel.taps();
  const int pq = set.q_kernel.forward_shift();
  const auto den = poly_add(std::vector<double>{1.0}, [&] {
    auto d = poly_delay(taps, set.period_n - pq);
    for (double& c : d) c = -c;
    return d;
  }());
  const TransferFunction memory(taps, den, set.period_n - pq - set.l_shift, kTs);
  return set.l_causal * memory;
}

}  // namespace

TEST(Pid, RampsUnderConstantError) {
  PidController pid(0.5);
  EXPECT_EQ(pid.step(2.0), 0.0);  // output depends on the previous error only
  EXPECT_EQ(pid.step(2.0), 1.0);
  EXPECT_EQ(pid.step(2.0), 2.0);
  EXPECT_EQ(pid.step(0.0), 3.0);
  EXPECT_EQ(pid.step(0.0), 3.0);  // frozen once the error vanishes
}

TEST(Pid, ClampsAndHolds) {
  PidController pid(1.0, OutputLimits{0.0, 2.5});
  pid.step(1.0);
  pid.step(1.0);
  pid.step(1.0);
  EXPECT_EQ(pid.step(1.0), 2.5);
  EXPECT_TRUE(pid.saturated());
  EXPECT_EQ(pid.step(-1.0), 2.5);
  EXPECT_EQ(pid.step(0.0), 1.5);  // no wind-up: leaves the limit immediately
  EXPECT_FALSE(pid.saturated());
  EXPECT_THROW(PidController(1.0, OutputLimits{1.0, 1.0}), ConfigurationError);
}

TEST(Repetitive, ZeroErrorGivesZeroOutput) {
  RepetitiveController rc(realistic_set(200));
  for (int k = 0; k < 2000; ++k) EXPECT_EQ(rc.step(0.0), 0.0);
}

TEST(Repetitive, ImpulseRepeatsEveryPeriod) {
  RepetitiveController rc(trivial_set(4));
  std::vector<double> out;
  for (int k = 0; k < 17; ++k) out.push_back(rc.step(k == 0 ? 1.0 : 0.0));
  for (int k = 0; k < 17; ++k) EXPECT_EQ(out[k], (k > 0 && k % 4 == 0) ? 1.0 : 0.0) << k;
}

TEST(Repetitive, FirstBreathIsNeutral) {
  const auto set = realistic_set(300);
  RepetitiveController rc(set);
  std::mt19937_64 rng(51);
  const auto e = testsupport::white_noise(rng, 400);
  const int m = set.memory_length();
  ASSERT_EQ(m, 300 - 14 - 25);
  for (int k = 0; k < m; ++k) EXPECT_EQ(rc.step(e[k]), 0.0) << k;
  EXPECT_NE(rc.step(e[m]), 0.0);
}

TEST(Repetitive, StreamingMatchesOfflineRational) {
  for (int n : {100, 300}) {
    const auto set = realistic_set(n);
    RepetitiveController rc(set);
    std::mt19937_64 rng(52);
    const auto e = testsupport::white_noise(rng, 10 * static_cast<std::size_t>(n));
    const auto expected = filter_stream(offline_r(set), e, std::nullopt, ignore_warnings());
    double sq = 0.0;
    for (std::size_t k = 0; k < e.size(); ++k) {
      const double d = rc.step(e[k]) - expected[k];
      sq += d * d;
    }
    EXPECT_LE(std::sqrt(sq / static_cast<double>(e.size())), 1e-8) << "N = " << n;
  }
}

TEST(Repetitive, RejectsShiftBudgetViolation) {
  auto set = realistic_set(39);  // 14 + 25 = 39, no memory left
  EXPECT_THROW(RepetitiveController{set}, ConfigurationError);
  set.period_n = 40;
  EXPECT_NO_THROW(RepetitiveController{set});
}

TEST(Repetitive, OverflowFaultsAndDisables) {
  RcFilterSet set{TransferFunction::gain(1e12, kTs), 0, unit_q(), 4};
  ControllerConfig cfg;
  cfg.filterset = set;
  cfg.rc_enabled = true;
  cfg.sample_time = kTs;
  Controller c(cfg);
  for (int k = 0; k < 4; ++k) c.step(1.0, 0.0);
  EXPECT_TRUE(c.rc_active());
  c.step(1.0, 0.0);  // RC output would be 1e12
  EXPECT_TRUE(c.rc_faulted());
  EXPECT_EQ(c.last_rc_output(), 0.0);
  const double u = c.step(1.0, 0.0);
  EXPECT_TRUE(std::isfinite(u));
  EXPECT_LT(std::abs(u), 1.0);  // PID alone keeps integrating a unit error
}

TEST(Controller, DisabledRcIsBitIdenticalToPid) {
  ControllerConfig cfg;
  cfg.filterset = realistic_set(200);
  cfg.rc_enabled = false;
  Controller c(cfg);
  PidController pid;
  std::mt19937_64 rng(53);
  const auto r = testsupport::white_noise(rng, 5000), y = testsupport::white_noise(rng, 5000);
  for (std::size_t k = 0; k < r.size(); ++k) EXPECT_EQ(c.step(r[k], y[k]), pid.step(r[k] - y[k]));
}

TEST(Controller, ZeroInputsFreezeCommand) {
  ControllerConfig cfg;
  cfg.filterset = realistic_set(200);
  cfg.rc_enabled = true;
  Controller c(cfg);
  for (int k = 0; k < 1000; ++k) EXPECT_EQ(c.step(0.0, 0.0), 0.0);
}

TEST(Controller, RejectsMismatchedSampleTime) {
  ControllerConfig cfg;
  cfg.filterset = realistic_set(200);
  cfg.rc_enabled = true;
  cfg.sample_time = 1e-3;
  EXPECT_THROW(Controller{cfg}, ConfigurationError);
  cfg.filterset.reset();
  EXPECT_THROW(Controller{cfg}, ConfigurationError);
}

TEST(ControllerProperty, LinearAndShiftInvariant) {
  const int n = 120;
  ControllerConfig cfg;
  cfg.filterset = realistic_set(n);
  cfg.rc_enabled = true;
  std::mt19937_64 rng(54);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto e1 = testsupport::white_noise(rng, 8 * n), e2 = testsupport::white_noise(rng, 8 * n);
    const double a = coef(rng), b = coef(rng);
    Controller c1(cfg), c2(cfg), c12(cfg), shifted(cfg);
    std::vector<double> u1, u2, u12, us;
    for (std::size_t k = 0; k < e1.size(); ++k) {
      u1.push_back(c1.step(e1[k], 0.0));
      u2.push_back(c2.step(e2[k], 0.0));
      u12.push_back(c12.step(a * e1[k] + b * e2[k], 0.0));
      us.push_back(shifted.step(k < static_cast<std::size_t>(n) ? 0.0 : e1[k - n], 0.0));
    }
    for (std::size_t k = 0; k < e1.size(); ++k) {
      const double scale = 1.0 + std::abs(a * u1[k]) + std::abs(b * u2[k]);
      EXPECT_NEAR(u12[k], a * u1[k] + b * u2[k], 1e-12 * scale);
      if (k >= static_cast<std::size_t>(n)) {
        EXPECT_NEAR(us[k], u1[k - n], 1e-12 * (1.0 + std::abs(u1[k - n])));
      }
    }
  }
}
