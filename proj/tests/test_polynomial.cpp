#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "support.hpp"
#include "ventrc/polynomial.hpp"

using namespace ventrc;

TEST(Polynomial, EvalMatchesDirectSum) {
  const std::vector<double> c{1.0, -0.5, 0.25, 2.0};
  for (double w : {0.0, 0.3, 1.7, kPi}) {
    Complex direct{};
    for (std::size_t k = 0; k < c.size(); ++k) direct += c[k] * std::exp(Complex(0.0, -w * static_cast<double>(k)));
    EXPECT_NEAR(std::abs(poly_eval(c, w) - direct), 0.0, 1e-13);
  }
}

TEST(Polynomial, MultiplyAddDelay) {
  const std::vector<double> a{1.0, 2.0}, b{1.0, -1.0, 3.0};
  EXPECT_EQ(poly_multiply(a, b), (std::vector<double>{1.0, 1.0, 1.0, 6.0}));
  EXPECT_EQ(poly_add(a, b), (std::vector<double>{2.0, 1.0, 3.0}));
  EXPECT_EQ(poly_delay(a, 2), (std::vector<double>{0.0, 0.0, 1.0, 2.0}));
  EXPECT_TRUE(poly_multiply(std::vector<double>{}, b).empty());
}

TEST(Polynomial, RootsOfKnownQuadratic) {
  // (1 - 0.5 z^-1)(1 + 0.25 z^-1) = 1 - 0.25 z^-1 - 0.125 z^-2
  auto roots = poly_roots(std::vector<double>{1.0, -0.25, -0.125});
  std::sort(roots.begin(), roots.end(), [](Complex a, Complex b) { return a.real() < b.real(); });
  ASSERT_EQ(roots.size(), 2u);
  EXPECT_NEAR(roots[0].real(), -0.25, 1e-14);
  EXPECT_NEAR(roots[1].real(), 0.5, 1e-14);
  EXPECT_EQ(roots[0].imag(), 0.0);
}

TEST(Polynomial, RootsRejectZeroLeading) {
  EXPECT_THROW(poly_roots(std::vector<double>{0.0, 1.0}), DomainError);
  EXPECT_TRUE(poly_roots(std::vector<double>{2.0, 0.0, 0.0}).empty());
}

TEST(PolynomialProperty, RootsRoundTrip) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int degree = 1 + static_cast<int>(rng() % 8);
    const auto roots = testsupport::random_stable_roots(rng, degree, 0.98);
    const auto c = poly_from_roots(roots, 1.5);
    const auto found = poly_roots(c);
    ASSERT_EQ(found.size(), roots.size());
    for (const auto& r : roots) {
      double best = 1e9;
      for (const auto& f : found) best = std::min(best, std::abs(f - r));
      EXPECT_LT(best, 1e-6) << "trial " << trial;
    }
  }
}

TEST(PolynomialProperty, SchurTestAgreesWithRoots) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> coef(-1.5, 1.5);
  int stable = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> a{1.0};
    const int degree = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < degree; ++k) a.push_back(coef(rng));
    double max_mag = 0.0;
    for (const auto& r : poly_roots(a)) max_mag = std::max(max_mag, std::abs(r));
    if (std::abs(max_mag - 1.0) < 1e-6) continue;  // too close to call
    EXPECT_EQ(poly_is_schur_stable(a), max_mag < 1.0) << "trial " << trial;
    stable += max_mag < 1.0;
  }
  EXPECT_GT(stable, 50);
}

TEST(Polynomial, SchurEdgeCases) {
  EXPECT_TRUE(poly_is_schur_stable(std::vector<double>{1.0}));
  EXPECT_FALSE(poly_is_schur_stable(std::vector<double>{1.0, -1.0}));  // integrator
  EXPECT_FALSE(poly_is_schur_stable(std::vector<double>{}));
  EXPECT_TRUE(poly_is_schur_stable(std::vector<double>{2.0, -1.0}));   // pole at 0.5
}
