#pragma once

// Run configuration: a sectioned key-value text file (INI syntax), the bundled
// presets, and the translation into scenarios and gains.

#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "vslctl/errors.hpp"
#include "vslctl/fixed_inlet.hpp"
#include "vslctl/free_inlet.hpp"
#include "vslctl/fundamental_diagram.hpp"
#include "vslctl/pde_oracle.hpp"
#include "vslctl/profile.hpp"
#include "vslctl/scenario.hpp"

namespace vslctl {

struct DiagramConfig {
  std::string kind = "exponential";  // exponential | tabulated
  ExponentialFamily params;
  double rho_max = 1.6;
  std::vector<double> f, df, d2f;  // tabulated nodes on a uniform grid of [0, rho_max]
};

/// Initial density. All kinds except `samples` describe rho0(x) - rho*:
///   uniform     0
///   bump        amplitude x^2 (width - x)^2
///   polynomial  sum_i coeffs[i] x^i
///   samples     absolute densities on a uniform grid of [0, L], linearly interpolated
struct InitialConfig {
  std::string kind = "bump";
  double amplitude = 4.0;
  double width = 1.2;
  std::vector<double> coeffs;
  std::vector<double> samples;
};

enum class ControllerSelection { free_inlet, fixed_inlet, both };

struct RunConfig {
  std::string name = "custom";
  std::string note;

  DiagramConfig diagram;

  double length = 1.0;
  double rho_star = 0.7;
  double horizon = 30.0;
  std::size_t cells = 400;
  std::size_t snapshots = 41;
  InitialConfig initial;

  ControllerSelection controller = ControllerSelection::both;
  double k = 0.3;
  double sigma = 0.12;
  double gamma = 0.1;
  CalibrationMode mode = CalibrationMode::strict;

  PicardSettings picard;

  bool oracle = false;
  OracleSettings oracle_settings;
  double oracle_tolerance = 5e-4;

  std::string out_dir = "out";
  // max_x |1 - u| allowed at the horizon for the free-inlet law. The fixed-inlet
  // threshold is derived from the decay estimate (see control_deviation_bound).
  double u_threshold = 0.05;

  bool runs_free() const { return controller != ControllerSelection::fixed_inlet; }
  bool runs_fixed() const { return controller != ControllerSelection::free_inlet; }
};

inline std::string to_string(ControllerSelection c) {
  switch (c) {
    case ControllerSelection::free_inlet: return "free_inlet";
    case ControllerSelection::fixed_inlet: return "fixed_inlet";
    default: return "both";
  }
}

inline std::string to_string(CalibrationMode m) {
  return m == CalibrationMode::strict ? "strict" : "override";
}

namespace detail {

// Shortest text that parses back to the same double.
inline std::string format_double(double v) { return fmt::format("{}", v); }

inline std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += format_double(v[i]);
  }
  return out;
}

inline std::vector<double> parse_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("{}: '{}' is not a number", key, tok));
    }
  }
  return out;
}

class Reader {
 public:
  explicit Reader(const boost::property_tree::ptree& tree) : tree_(tree) {}

  double number(const std::string& key, double fallback) const {
    const auto v = tree_.get_optional<std::string>(key);
    if (!v) return fallback;
    const auto list = parse_list(*v, key);
    if (list.size() != 1) throw ConfigError(fmt::format("{}: expected one number", key));
    return list[0];
  }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    const double v = number(key, static_cast<double>(fallback));
    if (!(v >= 0.0) || v != std::floor(v))
      throw ConfigError(fmt::format("{}: expected a non-negative integer", key));
    return static_cast<std::size_t>(v);
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    return tree_.get<std::string>(key, fallback);
  }

  std::vector<double> list(const std::string& key) const {
    const auto v = tree_.get_optional<std::string>(key);
    return v ? parse_list(*v, key) : std::vector<double>{};
  }

  bool flag(const std::string& key, bool fallback) const {
    const auto v = tree_.get_optional<std::string>(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError(fmt::format("{}: expected true or false", key));
  }

 private:
  const boost::property_tree::ptree& tree_;
};

}  // namespace detail

inline RunConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(fmt::format("config parse error: {}", e.what()));
  }
  const detail::Reader r(tree);
  RunConfig c;
  c.name = r.text("run.name", c.name);
  c.note = r.text("run.note", c.note);

  c.diagram.kind = r.text("diagram.kind", c.diagram.kind);
  if (c.diagram.kind != "exponential" && c.diagram.kind != "tabulated")
    throw ConfigError(fmt::format("diagram.kind: unknown kind '{}'", c.diagram.kind));
  c.diagram.rho_max = r.number("diagram.rho_max", c.diagram.rho_max);
  c.diagram.params.A = r.number("diagram.A", c.diagram.params.A);
  c.diagram.params.b = r.number("diagram.b", c.diagram.params.b);
  c.diagram.params.gamma = r.number("diagram.gamma", c.diagram.params.gamma);
  c.diagram.params.a = r.number("diagram.a", c.diagram.params.a);
  c.diagram.f = r.list("diagram.f");
  c.diagram.df = r.list("diagram.df");
  c.diagram.d2f = r.list("diagram.d2f");

  c.length = r.number("scenario.length", c.length);
  c.rho_star = r.number("scenario.rho_star", c.rho_star);
  c.horizon = r.number("scenario.horizon", c.horizon);
  c.cells = r.count("scenario.cells", c.cells);
  c.snapshots = r.count("scenario.snapshots", c.snapshots);

  c.initial.kind = r.text("initial.kind", c.initial.kind);
  if (c.initial.kind != "uniform" && c.initial.kind != "bump" && c.initial.kind != "polynomial" &&
      c.initial.kind != "samples")
    throw ConfigError(fmt::format("initial.kind: unknown kind '{}'", c.initial.kind));
  c.initial.amplitude = r.number("initial.amplitude", c.initial.amplitude);
  c.initial.width = r.number("initial.width", c.initial.width);
  c.initial.coeffs = r.list("initial.coeffs");
  c.initial.samples = r.list("initial.samples");

  const auto law = r.text("controller.law", to_string(c.controller));
  if (law == "free_inlet") c.controller = ControllerSelection::free_inlet;
  else if (law == "fixed_inlet") c.controller = ControllerSelection::fixed_inlet;
  else if (law == "both") c.controller = ControllerSelection::both;
  else throw ConfigError(fmt::format("controller.law: unknown law '{}'", law));
  c.k = r.number("controller.k", c.k);
  c.sigma = r.number("controller.sigma", c.sigma);
  c.gamma = r.number("controller.gamma", c.gamma);
  const auto mode = r.text("controller.mode", to_string(c.mode));
  if (mode == "strict") c.mode = CalibrationMode::strict;
  else if (mode == "override") c.mode = CalibrationMode::override;
  else throw ConfigError(fmt::format("controller.mode: unknown mode '{}'", mode));

  c.picard.window = r.number("picard.window", c.picard.window);
  c.picard.samples_per_window = r.count("picard.samples_per_window", c.picard.samples_per_window);
  c.picard.tol = r.number("picard.tol", c.picard.tol);
  c.picard.max_iter = static_cast<int>(r.count("picard.max_iter", c.picard.max_iter));
  c.picard.safety = r.number("picard.safety", c.picard.safety);
  c.picard.max_retries = static_cast<int>(r.count("picard.max_retries", c.picard.max_retries));

  c.oracle = r.flag("oracle.enabled", c.oracle);
  c.oracle_settings.cells = r.count("oracle.cells", c.oracle_settings.cells);
  c.oracle_settings.dt = r.number("oracle.dt", c.oracle_settings.dt);
  try {
    c.oracle_settings.scheme = parse_scheme(r.text("oracle.scheme", to_string(c.oracle_settings.scheme)));
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  c.oracle_settings.cfl_cap = r.number("oracle.cfl_cap", c.oracle_settings.cfl_cap);
  c.oracle_tolerance = r.number("oracle.tolerance", c.oracle_tolerance);

  c.out_dir = r.text("output.dir", c.out_dir);
  c.u_threshold = r.number("output.u_threshold", c.u_threshold);

  if (c.cells < 2) throw ConfigError("scenario.cells must be at least 2");
  if (c.snapshots < 2) throw ConfigError("scenario.snapshots must be at least 2");
  if (!(c.horizon > 0.0)) throw ConfigError("scenario.horizon must be positive");
  if (c.picard.samples_per_window < 1) throw ConfigError("picard.samples_per_window must be >= 1");
  return c;
}

inline RunConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

/// Serialises every field; parse_config(serialize(c)) reproduces c exactly.
inline std::string serialize(const RunConfig& c) {
  using detail::format_double;
  std::string out;
  auto section = [&](const char* name) { out += fmt::format("[{}]\n", name); };
  auto put = [&](const char* key, const std::string& v) { out += fmt::format("{} = {}\n", key, v); };
  auto num = [&](const char* key, double v) { put(key, format_double(v)); };

  section("run");
  put("name", c.name);
  if (!c.note.empty()) put("note", c.note);

  section("diagram");
  put("kind", c.diagram.kind);
  num("rho_max", c.diagram.rho_max);
  num("A", c.diagram.params.A);
  num("b", c.diagram.params.b);
  num("gamma", c.diagram.params.gamma);
  num("a", c.diagram.params.a);
  if (!c.diagram.f.empty()) put("f", detail::format_list(c.diagram.f));
  if (!c.diagram.df.empty()) put("df", detail::format_list(c.diagram.df));
  if (!c.diagram.d2f.empty()) put("d2f", detail::format_list(c.diagram.d2f));

  section("scenario");
  num("length", c.length);
  num("rho_star", c.rho_star);
  num("horizon", c.horizon);
  put("cells", std::to_string(c.cells));
  put("snapshots", std::to_string(c.snapshots));

  section("initial");
  put("kind", c.initial.kind);
  num("amplitude", c.initial.amplitude);
  num("width", c.initial.width);
  if (!c.initial.coeffs.empty()) put("coeffs", detail::format_list(c.initial.coeffs));
  if (!c.initial.samples.empty()) put("samples", detail::format_list(c.initial.samples));

  section("controller");
  put("law", to_string(c.controller));
  num("k", c.k);
  num("sigma", c.sigma);
  num("gamma", c.gamma);
  put("mode", to_string(c.mode));

  section("picard");
  num("window", c.picard.window);
  put("samples_per_window", std::to_string(c.picard.samples_per_window));
  num("tol", c.picard.tol);
  put("max_iter", std::to_string(c.picard.max_iter));
  num("safety", c.picard.safety);
  put("max_retries", std::to_string(c.picard.max_retries));

  section("oracle");
  put("enabled", c.oracle ? "true" : "false");
  put("cells", std::to_string(c.oracle_settings.cells));
  num("dt", c.oracle_settings.dt);
  put("scheme", to_string(c.oracle_settings.scheme));
  num("cfl_cap", c.oracle_settings.cfl_cap);
  num("tolerance", c.oracle_tolerance);

  section("output");
  put("dir", c.out_dir);
  num("u_threshold", c.u_threshold);
  return out;
}

inline FundamentalDiagram build_diagram(const DiagramConfig& dc) {
  try {
    if (dc.kind == "exponential") return FundamentalDiagram::exponential(dc.params, dc.rho_max);
    return FundamentalDiagram::tabulated({dc.f, dc.df, dc.d2f}, dc.rho_max);
  } catch (const DomainError& e) {
    throw ConfigError(fmt::format("diagram: {}", e.what()));
  }
}

inline DensityProfile build_initial(const RunConfig& c, std::size_t cells) {
  const auto& ic = c.initial;
  const double rho_star = c.rho_star;
  try {
    if (ic.kind == "uniform") return DensityProfile::uniform(c.length, cells, rho_star, c.diagram.rho_max);
    if (ic.kind == "bump")
      return DensityProfile::sample(c.length, cells, rho_star, c.diagram.rho_max, [&](double x) {
        return rho_star + ic.amplitude * x * x * (ic.width - x) * (ic.width - x);
      });
    if (ic.kind == "polynomial")
      return DensityProfile::sample(c.length, cells, rho_star, c.diagram.rho_max, [&](double x) {
        double v = 0.0;
        for (auto it = ic.coeffs.rbegin(); it != ic.coeffs.rend(); ++it) v = v * x + *it;
        return rho_star + v;
      });
    if (ic.samples.size() < 2) throw ConfigError("initial.samples needs at least two values");
    return DensityProfile::sample(c.length, cells, rho_star, c.diagram.rho_max, [&](double x) {
      const double pos = x / c.length * static_cast<double>(ic.samples.size() - 1);
      const std::size_t i = std::min(static_cast<std::size_t>(pos), ic.samples.size() - 2);
      const double s = pos - static_cast<double>(i);
      return (1.0 - s) * ic.samples[i] + s * ic.samples[i + 1];
    });
  } catch (const DomainError& e) {
    throw ConfigError(fmt::format("initial profile: {}", e.what()));
  }
}

inline Scenario build_scenario(const RunConfig& c, std::size_t cells = 0) {
  return Scenario{build_diagram(c.diagram), build_initial(c, cells ? cells : c.cells), c.horizon,
                  c.snapshots};
}

inline FreeInletGain free_gain(const RunConfig& c) { return FreeInletGain{c.k, c.length, c.rho_star}; }

inline FixedInletGains fixed_gains(const RunConfig& c, const FundamentalDiagram& d) {
  return calibrate(d, c.rho_star, c.length, c.sigma, c.gamma, c.mode);
}

/// Preset names accepted by preset().
inline std::vector<std::string> preset_names() {
  return {"paper-sec5-free", "paper-sec5-fixed", "paper-fig7"};
}

/// The illustrative example: f(rho) = rho exp(-rho) on [0, 1.6], L = 1,
/// rho0 = rho* + 4 x^2 (1.2 - x)^2.
inline RunConfig preset(const std::string& name) {
  RunConfig c;
  c.name = name;
  c.diagram.kind = "exponential";
  c.diagram.params = ExponentialFamily{1.0, 1.0, 1.0, 0.0};
  c.diagram.rho_max = 1.6;
  c.length = 1.0;
  c.rho_star = 0.7;
  c.cells = 400;
  c.snapshots = 41;
  c.initial.kind = "bump";
  c.initial.amplitude = 4.0;
  c.initial.width = 1.2;
  c.k = 0.3;
  c.sigma = 0.12;
  c.gamma = 0.1;
  c.out_dir = "out/" + name;
  if (name == "paper-sec5-free") {
    c.controller = ControllerSelection::free_inlet;
    c.horizon = 30.0;
    c.u_threshold = 0.05;
  } else if (name == "paper-sec5-fixed") {
    c.controller = ControllerSelection::fixed_inlet;
    c.mode = CalibrationMode::override;
    c.horizon = 60.0;
    c.note = "gains fail the concavity margin, run in override mode";
  } else if (name == "paper-fig7") {
    c.controller = ControllerSelection::free_inlet;
    c.rho_star = 1.0;
    c.horizon = 60.0;
    c.note = "set point at the critical density, gain k = 0.3 reused";
  } else {
    throw ConfigError(fmt::format("unknown preset '{}'", name));
  }
  return c;
}

}  // namespace vslctl
