#pragma once

// Shared fixtures: the road, diagram and initial bump used throughout the tests.

#include <cmath>
#include <cstddef>

#include "vslctl/vslctl.hpp"

namespace vslctl::testing {

inline constexpr double kRhoMax = 1.6;
inline constexpr double kRhoStar = 0.7;
inline constexpr double kLength = 1.0;

inline FundamentalDiagram greenshields_exp() {
  return FundamentalDiagram::exponential({1.0, 1.0, 1.0, 0.0}, kRhoMax);
}

inline double bump(double x) { return 4.0 * x * x * (1.2 - x) * (1.2 - x); }

// Exact integral of bump over [0, 1].
inline constexpr double kBumpIntegral = 4.0 * (1.44 / 3.0 - 2.4 / 4.0 + 1.0 / 5.0);

inline DensityProfile bump_profile(std::size_t n, double rho_star = kRhoStar) {
  return DensityProfile::sample(kLength, n, rho_star, kRhoMax,
                                [&](double x) { return rho_star + bump(x); });
}

inline Scenario bump_scenario(std::size_t n, double horizon, std::size_t snapshots = 41) {
  return Scenario{greenshields_exp(), bump_profile(n), horizon, snapshots};
}

}  // namespace vslctl::testing
