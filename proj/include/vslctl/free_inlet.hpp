#pragma once

// Speed-limit feedback with a controllable inlet. The law rescales the flow so
// that f(rho) u M(rho, x) is constant in x, which turns the conservation law
// into rho_t = -k (rho - rho*) P(rho[t]) and makes the closed-loop solution an
// exponential rescaling of the initial deviation.

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
#include "vslctl/scenario.hpp"
#include "vslctl/trace.hpp"

namespace vslctl {

/// Gain k of the free-inlet law; admissible for 0 < k < 1 / (L rho*).
struct FreeInletGain {
  double k = 0.0;
  double length = 1.0;
  double rho_star = 0.0;

  double upper_bound() const { return 1.0 / (length * rho_star); }
  bool admissible() const { return k > 0.0 && k < upper_bound(); }

  static FreeInletGain make(double k, double length, double rho_star) {
    FreeInletGain g{k, length, rho_star};
    if (!(length > 0.0) || !(rho_star > 0.0))
      throw DomainError("free-inlet gain needs L > 0 and rho* > 0");
    if (!g.admissible())
      throw DomainError(fmt::format("gain k={} outside (0, {})", k, g.upper_bound()));
    return g;
  }
};

struct Bottleneck {
  double flow = 0.0;      // P(rho) = min_z f(rho(z)) M(rho, z)
  double position = 0.0;  // smallest arg-min
  std::size_t index = 0;
};

namespace detail {

inline void check_profile_matches(const FreeInletGain& g, const DensityProfile& p) {
  if (std::abs(p.length() - g.length) > 1e-12 * g.length ||
      std::abs(p.rho_star() - g.rho_star) > 1e-12 * g.rho_star)
    throw DomainError("profile geometry does not match the free-inlet gain");
}

/// f(rho_i) M(rho, x_i) on the grid.
inline std::vector<double> weighted_flows(const FreeInletGain& g, const FundamentalDiagram& d,
                                          const DensityProfile& p) {
  const auto cum = p.cumulative_deviations();
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double denom = 1.0 + g.k * cum[i];
    if (!(denom > 0.0)) throw StateEscapeError("weight denominator is not positive");
    out[i] = d.flow(p[i]) * (1.0 / denom);
  }
  return out;
}

inline Bottleneck argmin(const std::vector<double>& objective, const DensityProfile& p) {
  Bottleneck b{objective[0], 0.0, 0};
  for (std::size_t i = 1; i < objective.size(); ++i) {
    if (objective[i] < b.flow) {
      b.flow = objective[i];
      b.index = i;
    }
  }
  b.position = p.position(b.index);
  return b;
}

}  // namespace detail

/// M(rho, x) = 1 / (1 + k * int_0^x (rho - rho*)).
inline double weight(const FreeInletGain& g, const DensityProfile& p, double x) {
  detail::check_profile_matches(g, p);
  const double denom = 1.0 + g.k * p.cumulative_deviation(x);
  if (!(denom > 0.0)) throw StateEscapeError("weight denominator is not positive");
  return 1.0 / denom;
}

/// Minimum of f(rho) M over the grid and its first location.
inline Bottleneck bottleneck(const FreeInletGain& g, const FundamentalDiagram& d,
                             const DensityProfile& p) {
  detail::check_profile_matches(g, p);
  return detail::argmin(detail::weighted_flows(g, d, p), p);
}

/// u(x_i) for every grid point. u equals 1 exactly at the bottleneck.
inline std::vector<double> controls(const FreeInletGain& g, const FundamentalDiagram& d,
                                    const DensityProfile& p) {
  detail::check_profile_matches(g, p);
  const auto obj = detail::weighted_flows(g, d, p);
  const auto b = detail::argmin(obj, p);
  std::vector<double> u(obj.size());
  for (std::size_t i = 0; i < obj.size(); ++i) {
    if (!(obj[i] > 0.0)) throw DomainError("zero flow at a grid point: density left (0, rho_max]");
    u[i] = b.flow / obj[i];
  }
  return u;
}

/// u(x) = P(rho) / (f(rho(x)) M(rho, x)); x between grid points uses the linear interpolant.
inline double control(const FreeInletGain& g, const FundamentalDiagram& d, const DensityProfile& p,
                      double x) {
  const auto b = bottleneck(g, d, p);
  const double h = p.spacing();
  const std::size_t cell = std::min(static_cast<std::size_t>(x / h), p.intervals() - 1);
  const double s = std::clamp(x / h - static_cast<double>(cell), 0.0, 1.0);
  const double rho = (1.0 - s) * p[cell] + s * p[cell + 1];
  const double fx = d.flow(rho);
  if (!(fx > 0.0)) throw DomainError("zero flow at x: density left (0, rho_max]");
  if (s == 0.0 || s == 1.0) {
    const auto obj = detail::weighted_flows(g, d, p);
    return b.flow / obj[s == 0.0 ? cell : cell + 1];
  }
  return b.flow / (fx * weight(g, p, x));
}

/// Minimum of f on [lo, rho_max]; scans a grid so non-concave tables are handled too.
inline double min_flow_above(const FundamentalDiagram& d, double lo) {
  constexpr int kGrid = 2001;
  double m = std::min(d.flow(lo), d.flow(d.rho_max()));
  for (int j = 1; j < kGrid - 1; ++j) m = std::min(m, d.flow(lo + (d.rho_max() - lo) * j / (kGrid - 1.0)));
  return m;
}

/// c(s) = k min{f(rho) : min(s, rho*) <= rho <= rho_max} / (1 + k L (rho_max - rho*)).
inline double decay_rate_bound(const FreeInletGain& g, const FundamentalDiagram& d, double s) {
  if (!(s > 0.0)) throw DomainError("decay_rate_bound requires s > 0");
  if (s > d.rho_max() * (1.0 + 1e-12)) throw DomainError("decay_rate_bound requires s <= rho_max");
  const double lo = std::min(s, g.rho_star);
  return g.k * min_flow_above(d, lo) / (1.0 + g.k * g.length * (d.rho_max() - g.rho_star));
}

/// Lower bound on P(rho[t]) along any trajectory starting from a profile with minimum s.
inline double bottleneck_flow_floor(const FreeInletGain& g, const FundamentalDiagram& d, double s) {
  return decay_rate_bound(g, d, s) / g.k;
}

/// Largest window length for which the Picard map is a contraction with factor `safety`.
inline double contraction_window(const FreeInletGain& g, const FundamentalDiagram& d,
                                  double safety) {
  const double kl = g.k * g.length;
  const double coef = (d.capacity() * kl + d.lipschitz_constant()) * g.k *
                      std::max(g.rho_star, d.rho_max() - g.rho_star) /
                      ((1.0 - kl * g.rho_star) * (1.0 - kl * g.rho_star));
  return safety / coef;
}

namespace detail {

inline TraceSample record_free(const FreeInletGain& g, const FundamentalDiagram& d,
                               const DensityProfile& p, double t) {
  const auto obj = weighted_flows(g, d, p);
  const auto b = argmin(obj, p);
  TraceSample s;
  s.t = t;
  s.rho.assign(p.values().begin(), p.values().end());
  s.u.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) s.u[i] = b.flow / obj[i];
  s.sup_deviation = p.sup_deviation();
  s.inlet_flow = s.u.front() * d.flow(p[0]);
  s.outlet_flow = s.u.back() * d.flow(p[p.size() - 1]);
  s.bottleneck_position = b.position;
  s.bottleneck_flow = b.flow;
  return s;
}

inline SimulationTrace simulate_free_with_window(const FreeInletGain& g, const Scenario& scn,
                                                 const PicardSettings& ps, double window) {
  const auto& d = scn.diagram;
  const double rho_star = g.rho_star;
  const std::size_t n = ps.samples_per_window;
  const double spacing = scn.snapshot_spacing();
  const auto per_snapshot =
      static_cast<std::size_t>(std::ceil(spacing / window * (1.0 - 1e-12)));
  const double tw = spacing / static_cast<double>(per_snapshot);
  const double dt = tw / static_cast<double>(n);

  SimulationTrace trace;
  trace.law = "free_inlet";
  trace.length = scn.length();
  trace.rho_star = rho_star;
  trace.rho_max = d.rho_max();

  std::vector<double> rho(scn.rho0.values().begin(), scn.rho0.values().end());
  const std::size_t m = rho.size();
  std::vector<double> dev(m), cum(m), g_cur(n + 1), g_new(n + 1), integral(n + 1);
  double g_min = std::numeric_limits<double>::infinity();
  int worst_iterations = 0;

  // P of the profile rho* + dev * factor; cumulative deviations scale by the same factor.
  auto bottleneck_flow_at = [&](double factor) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      const double obj = d.flow(rho_star + dev[i] * factor) * (1.0 / (1.0 + g.k * factor * cum[i]));
      best = std::min(best, obj);
    }
    return best;
  };

  for (std::size_t snap = 0; snap < scn.snapshots; ++snap) {
    const double t0 = scn.snapshot_time(snap);
    trace.samples.push_back(record_free(g, d, DensityProfile(g.length, rho_star, d.rho_max(), rho), t0));
    if (snap + 1 == scn.snapshots) break;

    for (std::size_t w = 0; w < per_snapshot; ++w) {
      const double window_start = t0 + static_cast<double>(w) * tw;
      for (std::size_t i = 0; i < m; ++i) dev[i] = rho[i] - rho_star;
      cum = DensityProfile(g.length, rho_star, d.rho_max(), rho).cumulative_deviations();

      std::fill(g_cur.begin(), g_cur.end(), bottleneck_flow_at(1.0));
      double prev_diff = -1.0;
      bool converged = false;
      int it = 0;
      while (it < ps.max_iter) {
        ++it;
        integral[0] = 0.0;
        for (std::size_t j = 1; j <= n; ++j)
          integral[j] = integral[j - 1] + 0.5 * dt * (g_cur[j - 1] + g_cur[j]);
        double diff = 0.0;
        for (std::size_t j = 0; j <= n; ++j) {
          g_new[j] = bottleneck_flow_at(std::exp(-g.k * integral[j]));
          diff = std::max(diff, std::abs(g_new[j] - g_cur[j]));
        }
        if (prev_diff > 1e-13) trace.contraction_ratios.push_back(diff / prev_diff);
        prev_diff = diff;
        std::swap(g_cur, g_new);
        if (diff < ps.tol) {
          converged = true;
          break;
        }
      }
      if (!converged)
        throw ConvergenceError(fmt::format(
            "free-inlet Picard iteration did not converge in {} iterations (window {})",
            ps.max_iter, tw));
      worst_iterations = std::max(worst_iterations, it);

      integral[0] = 0.0;
      for (std::size_t j = 1; j <= n; ++j)
        integral[j] = integral[j - 1] + 0.5 * dt * (g_cur[j - 1] + g_cur[j]);
      for (std::size_t j = (trace.fixed_point_times.empty() ? 0 : 1); j <= n; ++j) {
        trace.fixed_point_times.push_back(window_start + static_cast<double>(j) * dt);
        trace.fixed_point_values.push_back(g_cur[j]);
        g_min = std::min(g_min, g_cur[j]);
      }
      const double factor = std::exp(-g.k * integral[n]);
      for (std::size_t i = 0; i < m; ++i) rho[i] = rho_star + dev[i] * factor;
    }
  }
  trace.metadata["window"] = tw;
  trace.metadata["picard_iterations_max"] = worst_iterations;
  trace.metadata["fixed_point_min"] = g_min;
  return trace;
}

}  // namespace detail

/// Closed-loop run of the free-inlet law. Each window solves the fixed-point
/// problem g(t) = P(rho[t]), rho(t, x) = rho* + (rho(t_w, x) - rho*) exp(-k int g);
/// a window that fails to converge is retried with half the length.
inline SimulationTrace simulate(const FreeInletGain& g, const Scenario& scn,
                                const PicardSettings& ps = {}) {
  const auto& d = scn.diagram;
  if (!g.admissible())
    throw DomainError(fmt::format("gain k={} outside (0, {})", g.k, g.upper_bound()));
  if (!(g.rho_star > 0.0 && g.rho_star < d.delta()))
    throw AssumptionViolation(fmt::format("set point {} outside (0, delta={})", g.rho_star, d.delta()));
  detail::check_profile_matches(g, scn.rho0);
  if (scn.snapshots < 2) throw DomainError("need at least two snapshots");

  const double bound_window = contraction_window(g, d, ps.safety);
  double window = ps.window > 0.0 ? std::min(ps.window, bound_window) : bound_window;
  for (int attempt = 0;; ++attempt) {
    try {
      auto trace = detail::simulate_free_with_window(g, scn, ps, window);
      const double kl = g.k * g.length;
      const double coef = (d.capacity() * kl + d.lipschitz_constant()) * g.k *
                          std::max(g.rho_star, d.rho_max() - g.rho_star) /
                          ((1.0 - kl * g.rho_star) * (1.0 - kl * g.rho_star));
      trace.metadata["k"] = g.k;
      trace.metadata["L_f"] = d.lipschitz_constant();
      trace.metadata["q_max"] = d.capacity();
      trace.metadata["rho_cr"] = d.critical_density();
      trace.metadata["c"] = decay_rate_bound(g, d, scn.rho0.min_value());
      trace.metadata["fixed_point_floor"] = bottleneck_flow_floor(g, d, scn.rho0.min_value());
      trace.metadata["contraction_bound"] = coef * trace.metadata["window"];
      trace.metadata["retries"] = attempt;
      return trace;
    } catch (const ConvergenceError&) {
      if (attempt >= ps.max_retries) throw;
      window *= 0.5;
    }
  }
}

}  // namespace vslctl
