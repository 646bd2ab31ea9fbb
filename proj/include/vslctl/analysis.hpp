#pragma once

// Post-run checks of closed-loop traces against the properties both feedback
// laws guarantee.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "vslctl/fixed_inlet.hpp"
#include "vslctl/free_inlet.hpp"
#include "vslctl/scenario.hpp"
#include "vslctl/trace.hpp"

namespace vslctl {

struct InvariantResult {
  std::string name;
  bool passed = true;
  bool warning_only = false;  // reported, but never fails a run
  std::string detail;
};

struct InvariantReport {
  std::vector<InvariantResult> results;

  bool all_passed() const {
    return std::all_of(results.begin(), results.end(),
                       [](const auto& r) { return r.passed || r.warning_only; });
  }

  const InvariantResult* find(const std::string& name) const {
    for (const auto& r : results)
      if (r.name == name) return &r;
    return nullptr;
  }
};

/// Least-squares slope of -log(sup deviation) against time over the snapshots
/// with a positive deviation.
inline double fitted_decay_rate(const SimulationTrace& trace) {
  double st = 0, sy = 0, stt = 0, sty = 0;
  std::size_t n = 0;
  for (const auto& s : trace.samples) {
    if (!(s.sup_deviation > 0.0)) continue;
    const double y = std::log(s.sup_deviation);
    st += s.t;
    sy += y;
    stt += s.t * s.t;
    sty += s.t * y;
    ++n;
  }
  if (n < 2) return 0.0;
  const double denom = static_cast<double>(n) * stt - st * st;
  return -(static_cast<double>(n) * sty - st * sy) / denom;
}

inline double max_control_deviation(const TraceSample& s) {
  double m = 0.0;
  for (double u : s.u) m = std::max(m, std::abs(1.0 - u));
  return m;
}

/// Upper bound on max_x |1 - u(t, x)| for the fixed-inlet law implied by the
/// sup-norm decay estimate:
///   |1 - u| <= (L_f + sigma L + gamma L^2 / 2) |rho0 - rho*|_inf exp(-c t) / f_min
/// with f_min the minimum of f over [min(min rho0, rho*), rho_max].
inline double control_deviation_bound(const FixedInletGains& g, const FundamentalDiagram& d,
                                      const DensityProfile& rho0, double t) {
  const double lo = std::min(rho0.min_value(), g.rho_star);
  const double f_min = min_flow_above(d, lo);
  const double gain = d.lipschitz_constant() + g.sigma * g.length +
                      0.5 * g.gamma * g.length * g.length;
  return gain / f_min * rho0.sup_deviation() * std::exp(-g.c * t);
}

namespace detail {

class Collector {
 public:
  InvariantResult& open(std::string name) {
    report_.results.push_back({std::move(name), true, false, ""});
    return report_.results.back();
  }
  static void fail(InvariantResult& r, std::string detail) {
    if (!r.passed) return;
    r.passed = false;
    r.detail = std::move(detail);
  }
  InvariantReport take() { return std::move(report_); }

 private:
  InvariantReport report_;
};

inline void check_control_bounds(Collector& col, const SimulationTrace& trace) {
  auto& r = col.open("control_bounds");
  for (const auto& s : trace.samples)
    for (std::size_t i = 0; i < s.u.size(); ++i)
      if (!(s.u[i] > 0.0) || s.u[i] > 1.0)
        Collector::fail(r, fmt::format("u = {:.17g} at t={}, x={}", s.u[i], s.t, trace.position(i)));
}

inline void check_decay(Collector& col, const SimulationTrace& trace, double rate) {
  auto& r = col.open("decay_bound");
  const double s0 = trace.samples.front().sup_deviation;
  for (const auto& s : trace.samples) {
    const double bound = std::exp(-rate * s.t) * s0;
    if (s.sup_deviation > bound)
      Collector::fail(r, fmt::format("sup deviation {:.17g} > bound {:.17g} at t={}",
                                     s.sup_deviation, bound, s.t));
  }
  if (r.passed) r.detail = fmt::format("rate {:.6g}", rate);
}

inline void check_contraction(Collector& col, const SimulationTrace& trace, double bound) {
  auto& r = col.open("picard_contraction");
  const double worst = trace.max_contraction_ratio();
  if (worst > bound) Collector::fail(r, fmt::format("observed ratio {} > {}", worst, bound));
  if (r.passed) r.detail = fmt::format("max ratio {:.4g} <= {:.4g}", worst, bound);
}

}  // namespace detail

inline InvariantReport check_free_inlet(const SimulationTrace& trace, const FreeInletGain& g,
                                        const Scenario& scn, const PicardSettings& ps,
                                        double u_threshold) {
  const auto& d = scn.diagram;
  detail::Collector col;
  detail::check_control_bounds(col, trace);

  {
    auto& r = col.open("flux_identity");
    const double tol = 1e-6 * d.capacity();
    double worst = 0.0;
    for (std::size_t j = 0; j < trace.samples.size(); ++j) {
      const auto& s = trace.samples[j];
      const auto p = trace.profile(j);
      const auto cum = p.cumulative_deviations();
      const double P = *s.bottleneck_flow;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double err = std::abs(d.flow(p[i]) * s.u[i] / (1.0 + g.k * cum[i]) - P);
        worst = std::max(worst, err);
        if (err > tol)
          detail::Collector::fail(r, fmt::format("|f u M - P| = {} at t={}, x={}", err, s.t,
                                                 p.position(i)));
      }
    }
    if (r.passed) r.detail = fmt::format("max error {:.3g}", worst);
  }

  detail::check_decay(col, trace, decay_rate_bound(g, d, scn.rho0.min_value()));

  {
    auto& r = col.open("density_range");
    const double lo = std::min(scn.rho0.min_value(), g.rho_star);
    for (const auto& s : trace.samples)
      for (std::size_t i = 0; i < s.rho.size(); ++i)
        if (s.rho[i] < lo || s.rho[i] > d.rho_max())
          detail::Collector::fail(r, fmt::format("rho = {} at t={}, x={}", s.rho[i], s.t,
                                                 trace.position(i)));
  }

  {
    auto& r = col.open("fixed_point_floor");
    const double floor = bottleneck_flow_floor(g, d, scn.rho0.min_value());
    for (std::size_t j = 0; j < trace.fixed_point_values.size(); ++j)
      if (trace.fixed_point_values[j] < floor)
        detail::Collector::fail(r, fmt::format("P = {} < {} at t={}", trace.fixed_point_values[j],
                                               floor, trace.fixed_point_times[j]));
  }

  {
    auto& r = col.open("deviation_sign");
    for (const auto& s : trace.samples)
      for (std::size_t i = 0; i < s.rho.size(); ++i) {
        const double d0 = scn.rho0[i] - g.rho_star;
        const double dt = s.rho[i] - g.rho_star;
        if ((d0 > 0.0 && !(dt > 0.0)) || (d0 < 0.0 && !(dt < 0.0)) || (d0 == 0.0 && dt != 0.0))
          detail::Collector::fail(r, fmt::format("sign flip at t={}, x={}", s.t, trace.position(i)));
      }
  }

  if (scn.rho0[0] == g.rho_star) {
    auto& r = col.open("inlet_density");
    for (const auto& s : trace.samples)
      if (std::abs(s.rho[0] - g.rho_star) > 1e-12)
        detail::Collector::fail(r, fmt::format("rho(t,0) = {} at t={}", s.rho[0], s.t));
  }

  detail::check_contraction(col, trace, ps.safety);

  {
    auto& r = col.open("control_convergence");
    const double dev = max_control_deviation(trace.samples.back());
    if (dev > u_threshold)
      detail::Collector::fail(r, fmt::format("max |1-u| = {} > {} at t={}", dev, u_threshold,
                                             trace.samples.back().t));
    else
      r.detail = fmt::format("max |1-u| = {:.4g} <= {:.4g}", dev, u_threshold);
  }
  return col.take();
}

inline InvariantReport check_fixed_inlet(const SimulationTrace& trace, const FixedInletGains& g,
                                         const Scenario& scn) {
  const auto& d = scn.diagram;
  detail::Collector col;
  detail::check_control_bounds(col, trace);

  {
    auto& r = col.open("inlet_control");
    for (const auto& s : trace.samples)
      if (s.u.front() != 1.0)
        detail::Collector::fail(r, fmt::format("u(t,0) = {:.17g} at t={}", s.u.front(), s.t));
  }
  {
    auto& r = col.open("inlet_density");
    for (const auto& s : trace.samples)
      if (std::abs(s.rho.front() - g.rho_star) > 1e-12)
        detail::Collector::fail(r, fmt::format("rho(t,0) = {:.17g} at t={}", s.rho.front(), s.t));
  }

  detail::check_decay(col, trace, g.c);

  {
    auto& r = col.open("forward_invariance");
    for (std::size_t j = 0; j < trace.samples.size(); ++j) {
      const auto a = admissible(g, d, trace.profile(j));
      if (!a.admissible)
        detail::Collector::fail(r, fmt::format("slack {} at t={}, x={}", a.min_slack,
                                               trace.samples[j].t, a.worst_position));
    }
  }

  {
    auto& r = col.open("gronwall");
    const double margin = gronwall_margin(g, trace, scn.rho0.sup_deviation());
    // The fixed point is converged to the Picard tolerance, amplified by exp(sigma t).
    const double tol = 1e-8 * std::exp(g.sigma * scn.horizon);
    if (margin < -tol) detail::Collector::fail(r, fmt::format("margin {}", margin));
    else r.detail = fmt::format("margin {:.3g}", margin);
  }

  detail::check_contraction(col, trace, g.contraction_bound());

  {
    auto& r = col.open("control_convergence");
    const double dev = max_control_deviation(trace.samples.back());
    const double bound = control_deviation_bound(g, d, scn.rho0, trace.samples.back().t);
    if (dev > bound)
      detail::Collector::fail(r, fmt::format("max |1-u| = {} > {} at t={}", dev, bound,
                                             trace.samples.back().t));
    else
      r.detail = fmt::format("max |1-u| = {:.4g} <= {:.4g}", dev, bound);
  }

  {
    auto& r = col.open("signed_max_consistency");
    r.warning_only = true;
    const auto it = trace.metadata.find("signed_max_mismatch");
    const double mismatch = it == trace.metadata.end() ? 0.0 : it->second;
    if (mismatch > 1e-9)
      detail::Collector::fail(r, fmt::format("signed max differs from the sup norm by {}", mismatch));
  }
  return col.take();
}

}  // namespace vslctl
