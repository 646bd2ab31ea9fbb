#pragma once

// Direct method-of-lines discretisation of rho_t + (u f(rho))_x = 0 with the
// feedback law evaluated on the discrete state at every stage. Used to check
// the semi-analytic solvers against the conservation law itself.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "vslctl/errors.hpp"
#include "vslctl/fixed_inlet.hpp"
#include "vslctl/free_inlet.hpp"
#include "vslctl/profile.hpp"
#include "vslctl/scenario.hpp"
#include "vslctl/trace.hpp"

namespace vslctl {

enum class OracleScheme { central_flux_rk4, upwind_euler };

inline std::string to_string(OracleScheme s) {
  return s == OracleScheme::central_flux_rk4 ? "central_flux_rk4" : "upwind_euler";
}

inline OracleScheme parse_scheme(const std::string& s) {
  if (s == "central_flux_rk4") return OracleScheme::central_flux_rk4;
  if (s == "upwind_euler") return OracleScheme::upwind_euler;
  throw DomainError(fmt::format("unknown oracle scheme '{}'", s));
}

struct OracleSettings {
  std::size_t cells = 0;  // 0: use the scenario grid
  double dt = 0.0;        // 0: largest step allowed by cfl_cap
  OracleScheme scheme = OracleScheme::central_flux_rk4;
  double cfl_cap = 0.9;
  double divergence_band = 1e-9;  // relative overshoot of rho_max tolerated (and clipped)
};

using FeedbackLaw = std::variant<FreeInletGain, FixedInletGains>;

namespace detail {

inline DensityProfile resample(const DensityProfile& p, std::size_t cells) {
  if (cells == 0 || cells == p.intervals()) return p;
  return DensityProfile::sample(p.length(), cells, p.rho_star(), p.rho_max(), [&](double x) {
    const double pos = x / p.spacing();
    const std::size_t i = std::min(static_cast<std::size_t>(pos), p.intervals() - 1);
    const double s = pos - static_cast<double>(i);
    return (1.0 - s) * p[i] + s * p[i + 1];
  });
}

class OracleStepper {
 public:
  OracleStepper(const FundamentalDiagram& d, const FeedbackLaw& law, double length,
                double rho_star, OracleScheme scheme)
      : d_(d), law_(law), length_(length), rho_star_(rho_star), scheme_(scheme) {}

  bool pinned_inlet() const { return std::holds_alternative<FixedInletGains>(law_); }

  DensityProfile profile(const std::vector<double>& rho) const {
    try {
      return DensityProfile(length_, rho_star_, d_.rho_max(), rho);
    } catch (const DomainError& e) {
      throw ConvergenceError(fmt::format("oracle state diverged: {}", e.what()));
    }
  }

  std::vector<double> controls(const DensityProfile& p) const {
    if (const auto* g = std::get_if<FreeInletGain>(&law_)) return vslctl::controls(*g, d_, p);
    return controls_unchecked(std::get<FixedInletGains>(law_), d_, p);
  }

  std::vector<double> fluxes(const DensityProfile& p) const {
    auto q = controls(p);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] *= d_.flow(p[i]);
    return q;
  }

  /// -dq/dx on the grid.
  std::vector<double> rhs(const std::vector<double>& rho) const {
    const auto p = profile(rho);
    const auto q = fluxes(p);
    const std::size_t n = q.size() - 1;
    const double h = p.spacing();
    std::vector<double> out(q.size());
    if (scheme_ == OracleScheme::central_flux_rk4) {
      out[0] = -(-3.0 * q[0] + 4.0 * q[1] - q[2]) / (2.0 * h);
      for (std::size_t i = 1; i < n; ++i) out[i] = -(q[i + 1] - q[i - 1]) / (2.0 * h);
      out[n] = -(3.0 * q[n] - 4.0 * q[n - 1] + q[n - 2]) / (2.0 * h);
    } else {
      for (std::size_t i = 0; i <= n; ++i) {
        const bool backward = (d_.slope(rho[i]) >= 0.0 && i > 0) || i == n;
        out[i] = backward ? -(q[i] - q[i - 1]) / h : -(q[i + 1] - q[i]) / h;
      }
    }
    if (pinned_inlet()) out[0] = 0.0;
    return out;
  }

  void step(std::vector<double>& rho, double dt, double band) const {
    const std::size_t m = rho.size();
    auto axpy = [&](const std::vector<double>& base, const std::vector<double>& k, double a) {
      std::vector<double> out(m);
      for (std::size_t i = 0; i < m; ++i) out[i] = base[i] + a * k[i];
      return out;
    };
    if (scheme_ == OracleScheme::upwind_euler) {
      rho = axpy(rho, rhs(rho), dt);
    } else {
      const auto k1 = rhs(rho);
      const auto k2 = rhs(axpy(rho, k1, 0.5 * dt));
      const auto k3 = rhs(axpy(rho, k2, 0.5 * dt));
      const auto k4 = rhs(axpy(rho, k3, dt));
      for (std::size_t i = 0; i < m; ++i)
        rho[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if (pinned_inlet()) rho[0] = rho_star_;
    for (double& v : rho) {
      if (!(v > 0.0) || v > d_.rho_max() * (1.0 + band))
        throw ConvergenceError(fmt::format("oracle density {} left (0, {}]", v, d_.rho_max()));
      v = std::min(v, d_.rho_max());
    }
  }

  TraceSample record(const std::vector<double>& rho, double t) const {
    const auto p = profile(rho);
    if (const auto* g = std::get_if<FreeInletGain>(&law_)) return record_free(*g, d_, p, t);
    TraceSample s;
    s.t = t;
    s.rho = rho;
    s.u = controls(p);
    s.sup_deviation = p.sup_deviation();
    s.inlet_flow = s.u.front() * d_.flow(p[0]);
    s.outlet_flow = s.u.back() * d_.flow(p[p.size() - 1]);
    return s;
  }

 private:
  const FundamentalDiagram& d_;
  const FeedbackLaw& law_;
  double length_;
  double rho_star_;
  OracleScheme scheme_;
};

}  // namespace detail

/// Integrates the closed loop directly on the conservation law and samples it
/// at the scenario's snapshot times.
inline SimulationTrace integrate(const Scenario& scn, const FeedbackLaw& law,
                                 const OracleSettings& os = {}) {
  const auto& d = scn.diagram;
  if (!(os.cfl_cap > 0.0 && os.cfl_cap < 1.0)) throw DomainError("cfl_cap must lie in (0, 1)");
  if (scn.snapshots < 2) throw DomainError("need at least two snapshots");
  const auto rho0 = detail::resample(scn.rho0, os.cells);
  if (const auto* g = std::get_if<FixedInletGains>(&law)) {
    if (!admissible(*g, d, rho0).admissible)
      throw StateEscapeError("initial profile is not admissible for the fixed-inlet law");
  }

  const double h = rho0.spacing();
  const double wave_speed = d.lipschitz_constant();
  const double dt_cap = os.cfl_cap * h / wave_speed;
  if (os.dt > dt_cap)
    throw DomainError(fmt::format("time step {} violates the CFL cap {} (h={}, speed={})", os.dt,
                                  dt_cap, h, wave_speed));
  const double dt_target = os.dt > 0.0 ? os.dt : dt_cap;
  const double spacing = scn.snapshot_spacing();
  const auto steps = static_cast<std::size_t>(std::ceil(spacing / dt_target * (1.0 - 1e-12)));
  const double dt = spacing / static_cast<double>(steps);

  detail::OracleStepper stepper(d, law, rho0.length(), rho0.rho_star(), os.scheme);
  std::vector<double> rho(rho0.values().begin(), rho0.values().end());
  if (stepper.pinned_inlet()) rho[0] = rho0.rho_star();

  SimulationTrace trace;
  trace.law = std::holds_alternative<FreeInletGain>(law) ? "free_inlet_oracle" : "fixed_inlet_oracle";
  trace.length = rho0.length();
  trace.rho_star = rho0.rho_star();
  trace.rho_max = d.rho_max();
  for (std::size_t snap = 0; snap < scn.snapshots; ++snap) {
    trace.samples.push_back(stepper.record(rho, scn.snapshot_time(snap)));
    if (snap + 1 == scn.snapshots) break;
    for (std::size_t s = 0; s < steps; ++s) stepper.step(rho, dt, os.divergence_band);
  }
  trace.metadata["dt"] = dt;
  trace.metadata["cells"] = static_cast<double>(rho0.intervals());
  trace.metadata["cfl"] = dt * wave_speed / h;
  trace.notes.push_back("scheme " + to_string(os.scheme));
  return trace;
}

/// -dq/dx of the oracle's discretisation for a single profile; exposed for
/// consistency checks against the reduced closed-loop dynamics.
inline std::vector<double> oracle_rhs(const FundamentalDiagram& d, const FeedbackLaw& law,
                                      const DensityProfile& p,
                                      OracleScheme scheme = OracleScheme::central_flux_rk4) {
  detail::OracleStepper stepper(d, law, p.length(), p.rho_star(), scheme);
  return stepper.rhs(std::vector<double>(p.values().begin(), p.values().end()));
}

struct TraceDifference {
  double max_rho = 0.0;
  double max_u = 0.0;
  std::vector<double> times;
  std::vector<std::vector<double>> rho_slices;  // |rho1 - rho2| per snapshot of the first trace
};

namespace detail {

inline double interpolate_x(const std::vector<double>& v, double length, double x) {
  const std::size_t n = v.size() - 1;
  const double pos = std::clamp(x / length * static_cast<double>(n), 0.0, static_cast<double>(n));
  const std::size_t i = std::min(static_cast<std::size_t>(pos), n - 1);
  const double s = pos - static_cast<double>(i);
  return (1.0 - s) * v[i] + s * v[i + 1];
}

/// Field of `trace` at time t and position x, linear in both.
template <typename Field>
double interpolate(const SimulationTrace& trace, Field field, double t, double x) {
  const auto& s = trace.samples;
  if (t <= s.front().t) return interpolate_x(field(s.front()), trace.length, x);
  if (t >= s.back().t) return interpolate_x(field(s.back()), trace.length, x);
  auto hi = std::lower_bound(s.begin(), s.end(), t,
                             [](const TraceSample& a, double v) { return a.t < v; });
  auto lo = hi - 1;
  const double w = (t - lo->t) / (hi->t - lo->t);
  return (1.0 - w) * interpolate_x(field(*lo), trace.length, x) +
         w * interpolate_x(field(*hi), trace.length, x);
}

}  // namespace detail

/// max |rho1 - rho2| and |u1 - u2| over the first trace's samples; the second
/// trace is interpolated linearly when grids or times differ.
inline TraceDifference compare(const SimulationTrace& a, const SimulationTrace& b) {
  if (std::abs(a.length - b.length) > 1e-12 * std::max(a.length, b.length))
    throw DomainError(fmt::format("traces cover different lengths ({} vs {})", a.length, b.length));
  if (a.samples.empty() || b.samples.empty()) throw DomainError("cannot compare empty traces");
  TraceDifference out;
  const bool same_grid = a.intervals() == b.intervals() && a.samples.size() == b.samples.size();
  for (std::size_t j = 0; j < a.samples.size(); ++j) {
    const auto& sa = a.samples[j];
    const bool aligned = same_grid && std::abs(sa.t - b.samples[j].t) <= 1e-12 * (1.0 + std::abs(sa.t));
    std::vector<double> slice(sa.rho.size());
    for (std::size_t i = 0; i < sa.rho.size(); ++i) {
      double rho_b, u_b;
      if (aligned) {
        rho_b = b.samples[j].rho[i];
        u_b = b.samples[j].u[i];
      } else {
        const double x = a.position(i);
        rho_b = detail::interpolate(b, [](const TraceSample& s) -> const auto& { return s.rho; }, sa.t, x);
        u_b = detail::interpolate(b, [](const TraceSample& s) -> const auto& { return s.u; }, sa.t, x);
      }
      slice[i] = std::abs(sa.rho[i] - rho_b);
      out.max_rho = std::max(out.max_rho, slice[i]);
      out.max_u = std::max(out.max_u, std::abs(sa.u[i] - u_b));
    }
    out.times.push_back(sa.t);
    out.rho_slices.push_back(std::move(slice));
  }
  return out;
}

}  // namespace vslctl
