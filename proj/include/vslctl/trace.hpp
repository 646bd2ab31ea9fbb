#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vslctl/profile.hpp"

namespace vslctl {

struct TraceSample {
  double t = 0.0;
  std::vector<double> rho;
  std::vector<double> u;
  double sup_deviation = 0.0;
  double inlet_flow = 0.0;
  double outlet_flow = 0.0;
  std::optional<double> bottleneck_position;  // free inlet only
  std::optional<double> bottleneck_flow;      // P(rho[t]), free inlet only
};

/// Snapshots of a closed-loop run plus the fixed-point diagnostics that produced them.
struct SimulationTrace {
  std::string law;
  double length = 1.0;
  double rho_star = 0.0;
  double rho_max = 0.0;
  std::vector<TraceSample> samples;

  // Ordered so that serialised metadata is deterministic.
  std::map<std::string, double> metadata;
  std::vector<std::string> notes;

  // Converged fixed point on the solver's fine time grid.
  std::vector<double> fixed_point_times;
  std::vector<double> fixed_point_values;
  // Successive-difference ratios observed during the Picard iterations.
  std::vector<double> contraction_ratios;

  std::size_t intervals() const { return samples.empty() ? 0 : samples.front().rho.size() - 1; }

  double position(std::size_t i) const {
    return length * static_cast<double>(i) / static_cast<double>(intervals());
  }

  DensityProfile profile(std::size_t j) const {
    return DensityProfile(length, rho_star, rho_max, samples.at(j).rho);
  }

  double max_contraction_ratio() const {
    double m = 0.0;
    for (double r : contraction_ratios) m = r > m ? r : m;
    return m;
  }
};

}  // namespace vslctl
