#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "vslctl/analysis.hpp"
#include "vslctl/config.hpp"
#include "vslctl/errors.hpp"
#include "vslctl/fixed_inlet.hpp"
#include "vslctl/free_inlet.hpp"
#include "vslctl/io.hpp"
#include "vslctl/pde_oracle.hpp"

namespace vslctl {

enum ExitCode : int { kOk = 0, kInvariantViolation = 1, kConfigError = 2, kCertificationError = 3 };

struct RunOutcome {
  int exit_code = kOk;
  std::string report;
};

namespace detail {

inline std::string condition_line(const std::string& name, const std::string& statement,
                                   double lhs, double rhs, bool holds) {
  return fmt::format("  {:<18} {:<58} lhs = {:.10g}  rhs = {:.10g}  -> {}\n", name, statement, lhs,
                     rhs, holds ? "ok" : "VIOLATED");
}

inline std::string free_conditions(const RunConfig& c, const FundamentalDiagram& d, bool& all_ok) {
  std::string out = "free-inlet gain k:\n";
  const FreeInletGain g = free_gain(c);
  const bool range = g.admissible();
  out += condition_line("gain_range", "0 < k < 1 / (L rho*)", g.k, g.upper_bound(), range);
  const bool sp = c.rho_star > 0.0 && c.rho_star < d.delta();
  out += condition_line("set_point", "0 < rho* < delta", c.rho_star, d.delta(), sp);
  all_ok = all_ok && range && sp;
  return out;
}

inline std::string fixed_conditions(const RunConfig& c, const FundamentalDiagram& d, bool& all_ok) {
  std::string out = "fixed-inlet gains (sigma, gamma):\n";
  try {
      const auto g = calibrate(d, c.rho_star, c.length, c.sigma, c.gamma, CalibrationMode::override);
      for (const auto& cond : g.conditions) {
        out += condition_line(cond.name, cond.statement, cond.lhs, cond.rhs, cond.holds);
        all_ok = all_ok && cond.holds;
      }
      out += fmt::format("  derived: a = {:.10g}, Q = {:.10g}, q = {:.10g}, c = sigma - gamma L = {:.10g}\n",
                         g.a, g.Q, g.q, g.c);
      out += fmt::format("  certified: {}\n", g.certified ? "yes" : "no");
    } catch (const std::exception& e) {
      out += fmt::format("  calibration failed: {}\n", e.what());
      all_ok = false;
    }
    return out;
  }

  inline std::string diagram_summary(const FundamentalDiagram& d) {
    std::string out = "diagram:\n";
    if (d.has_critical_density())
      out += fmt::format("  rho_cr = {:.10g}, q_max = {:.10g}, delta = {:.10g}, L_f = {:.10g}\n",
                         d.critical_density(), d.capacity(), d.delta(), d.lipschitz_constant());
    const auto report = validate_assumptions(d, 201);
    for (const auto& chk : report.checks)
      out += fmt::format("  {:<22} {}{}\n", chk.name, chk.passed ? "ok" : "VIOLATED",
                         chk.passed ? "" : fmt::format(" at rho={} ({})", *chk.first_violation, chk.detail));
    return out;
  }

  inline std::string invariant_lines(const InvariantReport& r) {
    std::string out;
    for (const auto& i : r.results) {
      const auto tag = i.passed ? "PASS" : (i.warning_only ? "WARN" : "FAIL");
      out += i.detail.empty() ? fmt::format("  {:<6} {}\n", tag, i.name)
                              : fmt::format("  {:<6} {:<24} {}\n", tag, i.name, i.detail);
    }
    return out;
  }

  inline std::string metadata_lines(const SimulationTrace& t) {
    std::string out;
    for (const auto& [k, v] : t.metadata) out += fmt::format("  {} = {:.10g}\n", k, v);
    for (const auto& n : t.notes) out += fmt::format("  note: {}\n", n);
    return out;
  }

  }  // namespace detail

  /// Gain validation only: every sufficient inequality with both sides evaluated.
  inline std::string certify(const RunConfig& c, bool* all_ok = nullptr) {
    const auto d = build_diagram(c.diagram);
    bool ok = true;
    std::string out = fmt::format("certification for '{}' (L = {}, rho* = {})\n", c.name, c.length,
                                  c.rho_star);
    if (c.runs_free()) out += detail::free_conditions(c, d, ok);
    if (c.runs_fixed()) out += detail::fixed_conditions(c, d, ok);
    if (all_ok) *all_ok = ok;
    return out;
  }

  /// Runs the configured controllers (and the oracle when enabled), writes the
  /// trace files under c.out_dir and returns the report also written to report.txt.
  inline RunOutcome run(const RunConfig& c) {
    namespace fs = std::filesystem;
    RunOutcome outcome;
    std::string& rep = outcome.report;
    rep = fmt::format("run '{}'\n", c.name);
    if (!c.note.empty()) rep += fmt::format("note: {}\n", c.note);

    Scenario scn = [&] {
      try {
        return build_scenario(c);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    }();
    const auto& d = scn.diagram;
    rep += detail::diagram_summary(d);
    const bool diagram_ok = validate_assumptions(d, 201).all_passed();
    rep += fmt::format("scenario: L = {}, rho* = {}, horizon = {}, cells = {}, snapshots = {}\n",
                       c.length, c.rho_star, c.horizon, c.cells, c.snapshots);
    rep += fmt::format("initial sup deviation = {:.17g}\n", scn.rho0.sup_deviation());
    rep += certify(c);
    bool invariants_ok = diagram_ok;

    auto finish = [&](int code) {
      outcome.exit_code = code;
      fs::create_directories(c.out_dir);
      std::ofstream(fs::path(c.out_dir) / "report.txt", std::ios::binary) << rep;
      return outcome;
    };

    auto oracle_block = [&](const char* law, const FeedbackLaw& fb, const SimulationTrace& semi,
                            double rate) {
      if (!c.oracle) return;
      const auto oracle = integrate(scn, fb, c.oracle_settings);
      write_trace(fs::path(c.out_dir) / (std::string(law) + "_oracle"), oracle, rate);
      const auto diff = compare(oracle, semi);
      const bool ok = diff.max_rho <= c.oracle_tolerance;
      invariants_ok = invariants_ok && ok;
      rep += fmt::format("  {:<6} {:<24} max |drho| = {:.3g}, max |du| = {:.3g} (tolerance {:.3g}, {})\n",
                         ok ? "PASS" : "FAIL", "oracle_agreement", diff.max_rho, diff.max_u,
                         c.oracle_tolerance, oracle.notes.front());
    };

    try {
    if (c.runs_free()) {
      const auto g = free_gain(c);
      if (!g.admissible() || !(c.rho_star < d.delta())) {
        rep += "free-inlet: gain or set point outside the admissible range, not simulated\n";
        return finish(kCertificationError);
      }
      const auto trace = simulate(g, scn, c.picard);
      const double rate = decay_rate_bound(g, d, scn.rho0.min_value());
      write_trace(fs::path(c.out_dir) / "free_inlet", trace, rate);
      const auto inv = check_free_inlet(trace, g, scn, c.picard, c.u_threshold);
      invariants_ok = invariants_ok && inv.all_passed();
      rep += "free_inlet:\n" + detail::metadata_lines(trace);
      rep += fmt::format("  fitted decay rate = {:.6g} (bound c = {:.6g})\n", fitted_decay_rate(trace), rate);
      rep += detail::invariant_lines(inv);
      oracle_block("free_inlet", FeedbackLaw{g}, trace, rate);
    }

    if (c.runs_fixed()) {
      FixedInletGains g;
      try {
        g = fixed_gains(c, d);
      } catch (const CertificationError& e) {
        rep += fmt::format("fixed-inlet: certification failed in {} mode: {}\n", to_string(c.mode),
                           e.what());
        return finish(kCertificationError);
      }
      const auto trace = simulate(g, scn, c.picard);
      write_trace(fs::path(c.out_dir) / "fixed_inlet", trace, g.c);
      const auto inv = check_fixed_inlet(trace, g, scn);
      invariants_ok = invariants_ok && inv.all_passed();
      rep += fmt::format("fixed_inlet ({}):\n", g.certified ? "certified" : "override, not certified");
      rep += detail::metadata_lines(trace);
      rep += fmt::format("  fitted decay rate = {:.6g} (bound c = {:.6g})\n", fitted_decay_rate(trace), g.c);
      rep += detail::invariant_lines(inv);
      oracle_block("fixed_inlet", FeedbackLaw{g}, trace, g.c);
    }
  } catch (const StateEscapeError& e) {
    rep += fmt::format("INVARIANT VIOLATION: {}\n", e.what());
    return finish(kInvariantViolation);
  } catch (const ConvergenceError& e) {
    rep += fmt::format("INVARIANT VIOLATION: {}\n", e.what());
    return finish(kInvariantViolation);
  }

  rep += fmt::format("result: {}\n", invariants_ok ? "all invariants hold" : "INVARIANT VIOLATION");
  return finish(invariants_ok ? kOk : kInvariantViolation);
}

/// Difference report between two trace directories.
inline std::string compare_dirs(const std::filesystem::path& a, const std::filesystem::path& b) {
  const auto ta = read_trace(a);
  const auto tb = read_trace(b);
  const auto diff = compare(ta, tb);
  std::string out = fmt::format("compare {} vs {}\n", a.string(), b.string());
  out += fmt::format("max |drho| = {:.17g}\nmax |du|   = {:.17g}\n", diff.max_rho, diff.max_u);
  out += "t,max_drho\n";
  for (std::size_t j = 0; j < diff.times.size(); ++j) {
    double m = 0.0;
    for (double v : diff.rho_slices[j]) m = std::max(m, v);
    out += fmt::format("{:.17g},{:.17g}\n", diff.times[j], m);
  }
  return out;
}

}  // namespace vslctl
