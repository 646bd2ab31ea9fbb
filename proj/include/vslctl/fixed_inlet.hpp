#pragma once

// Speed-limit feedback with no speed limit at the inlet (u(t, 0) = 1) and the
// inlet density pinned to the set point. The law
//   u = (f(rho*) + sigma int_0^x (rho - rho*) - gamma x^2/2 |rho - rho*|_inf) / f(rho)
// reduces the conservation law to rho_t = -sigma (rho - rho*) + gamma x |rho - rho*|_inf.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "vslctl/errors.hpp"
#include "vslctl/fundamental_diagram.hpp"
#include "vslctl/profile.hpp"
#include "vslctl/roots.hpp"
#include "vslctl/scenario.hpp"
#include "vslctl/trace.hpp"

namespace vslctl {

/// One sufficient inequality of the gain calibration, lhs > rhs, with both sides evaluated.
struct GainCondition {
  std::string name;
  std::string statement;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

enum class CalibrationMode { strict, override };

struct FixedInletGains {
  double sigma = 0.0;
  double gamma = 0.0;
  double length = 1.0;
  double rho_star = 0.0;

  double a = 0.0;  // f'(rho* + a) = sigma L
  double Q = 0.0;  // min -f'' on [0, rho_max]
  double q = 0.0;  // max(0, max -f' on [rho* + a, rho_max])
  double c = 0.0;  // sigma - gamma L

  bool certified = false;
  std::vector<GainCondition> conditions;

  double contraction_bound() const { return gamma * length / sigma; }

  const GainCondition* condition(const std::string& name) const {
    for (const auto& c : conditions)
      if (c.name == name) return &c;
    return nullptr;
  }
};

/// Derives a, Q, q and c from (sigma, gamma) and evaluates the sufficient
/// conditions for regional stabilisation. Strict mode throws on the first
/// failing condition; override mode returns uncertified gains.
inline FixedInletGains calibrate(const FundamentalDiagram& d, double rho_star, double length,
                                 double sigma, double gamma,
                                 CalibrationMode mode = CalibrationMode::strict) {
  if (!(sigma > 0.0) || !(gamma > 0.0) || !(length > 0.0))
    throw DomainError("calibrate needs sigma, gamma, L > 0");
  const double rho_max = d.rho_max();
  const double rho_cr = d.critical_density();
  const double upper = std::min({d.delta(), rho_cr, rho_max / 2.0});
  if (!(rho_star > 0.0 && rho_star < upper))
    throw AssumptionViolation(
        fmt::format("set point {} outside (0, min(delta, rho_cr, rho_max/2) = {})", rho_star, upper));

  FixedInletGains g;
  g.sigma = sigma;
  g.gamma = gamma;
  g.length = length;
  g.rho_star = rho_star;
  g.c = sigma - gamma * length;

  const double sl = sigma * length;
  auto add = [&](std::string name, std::string statement, double lhs, double rhs) {
    g.conditions.push_back({std::move(name), std::move(statement), lhs, rhs, lhs > rhs});
  };
  add("flow_margin", "f(rho*) > sigma L (rho_max + rho*) / 2", d.flow(rho_star),
      0.5 * sl * (rho_max + rho_star));
  add("slope_margin", "f'(rho*) > sigma L", d.slope(rho_star), sl);
  if (!g.conditions.back().holds)
    throw CertificationError(fmt::format(
        "sigma L = {} exceeds f'(rho*) = {}: no a with f'(rho* + a) = sigma L", sl,
        d.slope(rho_star)));

  auto slope_eq = [&](double a) { return d.slope(rho_star + a) - sl; };
  const auto a = bisect(slope_eq, 0.0, rho_cr - rho_star);
  if (!a) throw CertificationError("no root of f'(rho* + a) = sigma L on (0, rho_cr - rho*)");
  g.a = *a;

  constexpr int kGrid = 2001;
  g.Q = std::numeric_limits<double>::infinity();
  for (int j = 0; j < kGrid; ++j) g.Q = std::min(g.Q, -d.curvature(rho_max * j / (kGrid - 1.0)));
  g.q = 0.0;
  const double lo = rho_star + g.a;
  for (int j = 0; j < kGrid; ++j) g.q = std::max(g.q, -d.slope(lo + (rho_max - lo) * j / (kGrid - 1.0)));

  add("concavity_margin", "sigma Q a^2 / (2 (q + sigma L)(rho_max - rho*)) > gamma L",
      sigma * g.Q * g.a * g.a / (2.0 * (g.q + sl) * (rho_max - rho_star)), gamma * length);
  add("decay_positive", "sigma > gamma L", sigma, gamma * length);

  g.certified = std::all_of(g.conditions.begin(), g.conditions.end(),
                            [](const auto& c) { return c.holds; });
  if (!g.certified && mode == CalibrationMode::strict) {
    for (const auto& c : g.conditions)
      if (!c.holds)
        throw CertificationError(
            fmt::format("{} violated: {} ({} vs {})", c.name, c.statement, c.lhs, c.rhs));
  }
  // The Picard map only contracts when sigma > gamma L, whatever the mode.
  if (!(g.c > 0.0))
    throw CertificationError(fmt::format("sigma = {} does not exceed gamma L = {}", sigma,
                                         gamma * length));
  return g;
}

struct Admissibility {
  bool admissible = false;
  bool boundary_ok = false;
  double min_slack = 0.0;        // min over the grid of f(rho(x)) - rhs(x)
  double worst_position = 0.0;
};

namespace detail {

inline void check_profile_matches(const FixedInletGains& g, const DensityProfile& p) {
  if (std::abs(p.length() - g.length) > 1e-12 * g.length ||
      std::abs(p.rho_star() - g.rho_star) > 1e-12 * g.rho_star)
    throw DomainError("profile geometry does not match the fixed-inlet gains");
}

/// f(rho*) + sigma int_0^x (rho - rho*) - gamma x^2/2 |rho - rho*|_inf on the grid:
/// the flow the law prescribes at each x.
inline std::vector<double> prescribed_flows(const FixedInletGains& g, const FundamentalDiagram& d,
                                            const DensityProfile& p) {
  const auto cum = p.cumulative_deviations();
  const double sup = p.sup_deviation();
  const double base = d.flow(g.rho_star);
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x = p.position(i);
    out[i] = base + g.sigma * cum[i] - g.gamma * 0.5 * x * x * sup;
  }
  return out;
}

constexpr double kBoundaryTol = 1e-9;

}  // namespace detail

/// Membership test for the state space of the fixed-inlet law.
inline Admissibility admissible(const FixedInletGains& g, const FundamentalDiagram& d,
                                const DensityProfile& p) {
  detail::check_profile_matches(g, p);
  Admissibility out;
  out.boundary_ok = std::abs(p[0] - g.rho_star) <= detail::kBoundaryTol * d.rho_max();
  const auto rhs = detail::prescribed_flows(g, d, p);
  out.min_slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double slack = d.flow(p[i]) - rhs[i];
    if (slack < out.min_slack) {
      out.min_slack = slack;
      out.worst_position = p.position(i);
    }
  }
  // Rounding allowance: both sides are O(q_max) quantities.
  out.admissible = out.boundary_ok && out.min_slack >= -1e-12 * d.flow(g.rho_star);
  return out;
}

/// u at every grid point without the state-space check.
inline std::vector<double> controls_unchecked(const FixedInletGains& g,
                                              const FundamentalDiagram& d,
                                              const DensityProfile& p) {
  detail::check_profile_matches(g, p);
  auto u = detail::prescribed_flows(g, d, p);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double fx = d.flow(p[i]);
    if (!(fx > 0.0)) throw DomainError("zero flow at a grid point: density left (0, rho_max]");
    u[i] /= fx;
  }
  return u;
}

constexpr double kControlTol = 1e-9;

/// u at every grid point; throws StateEscapeError when any value leaves (0, 1].
inline std::vector<double> controls(const FixedInletGains& g, const FundamentalDiagram& d,
                                    const DensityProfile& p) {
  auto u = controls_unchecked(g, d, p);
  for (std::size_t i = 0; i < u.size(); ++i)
    if (!(u[i] > 0.0) || u[i] > 1.0 + kControlTol)
      throw StateEscapeError(
          fmt::format("control {} at x={} outside (0, 1]: state left the admissible set", u[i],
                      p.position(i)));
  return u;
}

/// u(x) at a grid position (x is snapped to the nearest grid point).
inline double control(const FixedInletGains& g, const FundamentalDiagram& d,
                      const DensityProfile& p, double x) {
  if (!(x >= 0.0) || x > p.length() * (1.0 + 1e-14))
    throw DomainError(fmt::format("position {} outside [0, {}]", x, p.length()));
  const auto i = static_cast<std::size_t>(std::lround(x / p.spacing()));
  const auto u = controls_unchecked(g, d, p);
  const double v = u[std::min(i, u.size() - 1)];
  if (!(v > 0.0) || v > 1.0 + kControlTol)
    throw StateEscapeError(fmt::format("control {} at x={} outside (0, 1]", v, x));
  return v;
}

/// Closed-loop run of the fixed-inlet law. Solves
///   g(t) = exp(-sigma t) max_x (rho0(x) - rho* + gamma x int_0^t exp(sigma s) g(s) ds)
/// by Picard iteration over the whole horizon and rebuilds
///   rho(t, x) = rho* + exp(-sigma t)(rho0(x) - rho* + gamma x int_0^t exp(sigma s) g(s) ds).
/// The time step is window / samples_per_window (window defaults to 1).
inline SimulationTrace simulate(const FixedInletGains& g, const Scenario& scn,
                                const PicardSettings& ps = {}) {
  const auto& d = scn.diagram;
  detail::check_profile_matches(g, scn.rho0);
  if (!(g.c > 0.0)) throw CertificationError("fixed-inlet gains need sigma > gamma L");
  if (scn.snapshots < 2) throw DomainError("need at least two snapshots");
  const auto start = admissible(g, d, scn.rho0);
  if (!start.admissible)
    throw StateEscapeError(fmt::format(
        "initial profile is not admissible (boundary {}, min slack {} at x={})",
        start.boundary_ok ? "ok" : "mismatch", start.min_slack, start.worst_position));

  const double rho_star = g.rho_star;
  const double sigma = g.sigma;
  const double target_dt =
      (ps.window > 0.0 ? ps.window : 1.0) / static_cast<double>(ps.samples_per_window);
  const double spacing = scn.snapshot_spacing();
  const auto per_snapshot =
      static_cast<std::size_t>(std::ceil(spacing / target_dt * (1.0 - 1e-12)));
  const std::size_t n = per_snapshot * (scn.snapshots - 1);
  std::vector<double> times(n + 1);
  for (std::size_t j = 0; j <= n; ++j)
    times[j] = scn.horizon * static_cast<double>(j) / static_cast<double>(n);

  const std::size_t m = scn.rho0.size();
  std::vector<double> dev(m), xs(m);
  for (std::size_t i = 0; i < m; ++i) {
    dev[i] = scn.rho0[i] - rho_star;
    xs[i] = scn.rho0.position(i);
  }
  dev[0] = 0.0;  // inlet density is pinned to the set point

  auto signed_max = [&](double drift) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) best = std::max(best, dev[i] + g.gamma * xs[i] * drift);
    return best;
  };
  // drift(t) = int_0^t exp(sigma s) g(s) ds by trapezoid.
  auto drifts = [&](const std::vector<double>& gv) {
    std::vector<double> out(n + 1, 0.0);
    for (std::size_t j = 1; j <= n; ++j)
      out[j] = out[j - 1] + 0.5 * (times[j] - times[j - 1]) *
                                (std::exp(sigma * times[j - 1]) * gv[j - 1] +
                                 std::exp(sigma * times[j]) * gv[j]);
    return out;
  };

  SimulationTrace trace;
  trace.law = "fixed_inlet";
  trace.length = scn.length();
  trace.rho_star = rho_star;
  trace.rho_max = d.rho_max();

  std::vector<double> gv(n + 1), next(n + 1);
  for (std::size_t j = 0; j <= n; ++j) gv[j] = std::exp(-sigma * times[j]) * signed_max(0.0);
  double prev_diff = -1.0;
  int it = 0;
  bool converged = false;
  while (it < ps.max_iter) {
    ++it;
    const auto drift = drifts(gv);
    double diff = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
      next[j] = std::exp(-sigma * times[j]) * signed_max(drift[j]);
      diff = std::max(diff, std::abs(next[j] - gv[j]));
    }
    if (prev_diff > 1e-13) trace.contraction_ratios.push_back(diff / prev_diff);
    prev_diff = diff;
    std::swap(gv, next);
    if (diff < ps.tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw ConvergenceError(
        fmt::format("fixed-inlet Picard iteration did not converge in {} iterations", ps.max_iter));

  const auto drift = drifts(gv);
  trace.fixed_point_times = times;
  trace.fixed_point_values = gv;

  const double inlet = d.flow(rho_star);
  double mismatch = 0.0;
  for (std::size_t snap = 0; snap < scn.snapshots; ++snap) {
    const std::size_t j = snap * per_snapshot;
    const double decay = std::exp(-sigma * times[j]);
    std::vector<double> rho(m);
    for (std::size_t i = 0; i < m; ++i) {
      rho[i] = rho_star + decay * (dev[i] + g.gamma * xs[i] * drift[j]);
      if (!(rho[i] > 0.0) || rho[i] > d.rho_max())
        throw StateEscapeError(fmt::format("density {} at t={}, x={} outside (0, {}]", rho[i],
                                           times[j], xs[i], d.rho_max()));
    }
    DensityProfile p(scn.length(), rho_star, d.rho_max(), rho);
    TraceSample s;
    s.t = scn.snapshot_time(snap);
    s.rho = std::move(rho);
    s.u = controls(g, d, p);
    s.sup_deviation = p.sup_deviation();
    s.inlet_flow = inlet * s.u.front();
    s.outlet_flow = s.u.back() * d.flow(p[p.size() - 1]);
    mismatch = std::max(mismatch, std::abs(s.sup_deviation - gv[j]));
    trace.samples.push_back(std::move(s));
  }

  trace.metadata["sigma"] = sigma;
  trace.metadata["gamma"] = g.gamma;
  trace.metadata["a"] = g.a;
  trace.metadata["Q"] = g.Q;
  trace.metadata["q"] = g.q;
  trace.metadata["c"] = g.c;
  trace.metadata["certified"] = g.certified ? 1.0 : 0.0;
  trace.metadata["contraction_bound"] = g.contraction_bound();
  trace.metadata["picard_iterations_max"] = it;
  trace.metadata["time_step"] = times[1] - times[0];
  trace.metadata["signed_max_mismatch"] = mismatch;
  if (mismatch > 1e-9)
    trace.notes.push_back(fmt::format(
        "signed maximum of the deviation differs from the sup norm by up to {}", mismatch));
  return trace;
}

/// min over the fixed-point grid of |rho0 - rho*|_inf + gamma L int_0^t y - y(t),
/// y(t) = g(t) exp(sigma t). Non-negative when the Gronwall estimate holds.
inline double gronwall_margin(const FixedInletGains& g, const SimulationTrace& trace,
                              double initial_sup) {
  const auto& t = trace.fixed_point_times;
  const auto& v = trace.fixed_point_values;
  double integral = 0.0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < t.size(); ++j) {
    const double y = v[j] * std::exp(g.sigma * t[j]);
    if (j > 0)
      integral += 0.5 * (t[j] - t[j - 1]) * (v[j - 1] * std::exp(g.sigma * t[j - 1]) + y);
    worst = std::min(worst, initial_sup + g.gamma * g.length * integral - y);
  }
  return worst;
}

}  // namespace vslctl
