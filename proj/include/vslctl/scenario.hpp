#pragma once

#include <cstddef>

#include "vslctl/fundamental_diagram.hpp"
#include "vslctl/profile.hpp"

namespace vslctl {

/// A road of length L, a set point, an initial density and a time horizon.
/// Snapshot times are uniform over [0, horizon].
struct Scenario {
  FundamentalDiagram diagram;
  DensityProfile rho0;
  double horizon = 30.0;
  std::size_t snapshots = 41;

  double length() const { return rho0.length(); }
  double rho_star() const { return rho0.rho_star(); }

  double snapshot_time(std::size_t j) const {
    return horizon * static_cast<double>(j) / static_cast<double>(snapshots - 1);
  }
  double snapshot_spacing() const { return horizon / static_cast<double>(snapshots - 1); }
};

/// Settings of the fixed-point solvers. A window of 0 means "derive from the
/// contraction estimate".
struct PicardSettings {
  double window = 0.0;
  std::size_t samples_per_window = 64;
  double tol = 1e-10;
  int max_iter = 500;
  double safety = 0.5;
  int max_retries = 8;
};

}  // namespace vslctl
