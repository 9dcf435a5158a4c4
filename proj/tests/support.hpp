#pragma once

#include <complex>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ventrc/config.hpp"
#include "ventrc/plant.hpp"
#include "ventrc/polynomial.hpp"

namespace testsupport {

// Hand-rolled generators for property tests. Every test seeds its own engine
// so failures reproduce.

inline std::vector<ventrc::Complex> random_stable_roots(std::mt19937_64& rng, int count, double max_radius) {
  std::uniform_real_distribution<double> radius(0.05, max_radius);
  std::uniform_real_distribution<double> angle(0.1, ventrc::kPi - 0.1);
  std::uniform_real_distribution<double> real(-max_radius, max_radius);
  std::vector<ventrc::Complex> roots;
  while (static_cast<int>(roots.size()) + 2 <= count) {
    const auto r = std::polar(radius(rng), angle(rng));
    roots.push_back(r);
    roots.push_back(std::conj(r));
  }
  if (static_cast<int>(roots.size()) < count) roots.emplace_back(real(rng), 0.0);
  return roots;
}

inline std::vector<double> white_noise(std::mt19937_64& rng, std::size_t n, double std = 1.0) {
  std::normal_distribution<double> d(0.0, std);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline std::vector<ventrc::ScenarioConfig> canonical_configs() {
  std::vector<ventrc::ScenarioConfig> out;
  for (auto p : ventrc::canonical_scenarios()) out.push_back({p, ventrc::CircuitParameters{}});
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ventrc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Direct convolution y = h * x of a causal FIR, zero initial state.
inline std::vector<double> convolve(const std::vector<double>& h, const std::vector<double>& x) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t k = 0; k < x.size(); ++k)
    for (std::size_t j = 0; j < h.size() && j <= k; ++j) y[k] += h[j] * x[k - j];
  return y;
}

}  // namespace testsupport
