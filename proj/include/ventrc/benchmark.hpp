#pragma once

#include "ventrc/lti.hpp"

namespace ventrc {

/// Per-sample gain of the benchmark pure-integral controller Ki/(z - 1).
inline constexpr double kBenchmarkIntegralGain = 0.01257;
inline constexpr double kBenchmarkSampleTime = 2e-3;

/// gain / (z - 1) = gain z^-1 / (1 - z^-1)
inline TransferFunction integral_controller(double gain = kBenchmarkIntegralGain,
                                            double sample_time = kBenchmarkSampleTime) {
  return {{0.0, gain}, {1.0, -1.0}, 0, sample_time};
}

}  // namespace ventrc
