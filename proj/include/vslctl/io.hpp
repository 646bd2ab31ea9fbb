#pragma once

// CSV trace files. Every file has a header row and prints floating-point
// values with 17 significant digits; fields varying in t and x use long
// format (t, x, value).

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "vslctl/errors.hpp"
#include "vslctl/trace.hpp"

namespace vslctl {

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  return out;
}

template <typename Field>
void write_long(const std::filesystem::path& path, const SimulationTrace& trace, const char* name,
                Field field) {
  auto out = open_out(path);
  out << "t,x," << name << '\n';
  for (const auto& s : trace.samples) {
    const auto& v = field(s);
    for (std::size_t i = 0; i < v.size(); ++i)
      out << fmt::format("{:.17g},{:.17g},{:.17g}\n", s.t, trace.position(i), v[i]);
  }
}

}  // namespace detail

/// Writes density.csv, control.csv, norms.csv, flows.csv and, when the trace
/// carries bottleneck data, bottleneck.csv into `dir`. The norms file pairs the
/// sup deviation with exp(-rate t) times its initial value.
inline void write_trace(const std::filesystem::path& dir, const SimulationTrace& trace,
                        double bound_rate) {
  std::filesystem::create_directories(dir);
  detail::write_long(dir / "density.csv", trace, "rho",
                     [](const TraceSample& s) -> const auto& { return s.rho; });
  detail::write_long(dir / "control.csv", trace, "u",
                     [](const TraceSample& s) -> const auto& { return s.u; });
  {
    auto out = detail::open_out(dir / "norms.csv");
    out << "t,sup_deviation,bound\n";
    const double s0 = trace.samples.front().sup_deviation;
    for (const auto& s : trace.samples)
      out << fmt::format("{:.17g},{:.17g},{:.17g}\n", s.t, s.sup_deviation,
                         std::exp(-bound_rate * s.t) * s0);
  }
  {
    auto out = detail::open_out(dir / "flows.csv");
    out << "t,inlet,outlet\n";
    for (const auto& s : trace.samples)
      out << fmt::format("{:.17g},{:.17g},{:.17g}\n", s.t, s.inlet_flow, s.outlet_flow);
  }
  if (!trace.samples.empty() && trace.samples.front().bottleneck_position) {
    auto out = detail::open_out(dir / "bottleneck.csv");
    out << "t,x_star,P\n";
    for (const auto& s : trace.samples)
      out << fmt::format("{:.17g},{:.17g},{:.17g}\n", s.t, *s.bottleneck_position,
                         *s.bottleneck_flow);
  }
}

namespace detail {

/// (t -> values ordered by x) from a long-format file.
inline std::map<double, std::vector<std::pair<double, double>>> read_long(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError(fmt::format("cannot read {}", path.string()));
  std::string line;
  std::getline(in, line);
  std::map<double, std::vector<std::pair<double, double>>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c))
      throw DomainError(fmt::format("{}:{}: expected t,x,value", path.string(), lineno));
    rows[std::stod(a)].emplace_back(std::stod(b), std::stod(c));
  }
  return rows;
}

}  // namespace detail

/// Reads density.csv and control.csv back into a trace (rho* and rho_max are not stored).
inline SimulationTrace read_trace(const std::filesystem::path& dir) {
  const auto rho = detail::read_long(dir / "density.csv");
  const auto u = detail::read_long(dir / "control.csv");
  if (rho.empty()) throw DomainError(fmt::format("{}: empty trace", dir.string()));
  SimulationTrace trace;
  trace.law = dir.filename().string();
  for (const auto& [t, pts] : rho) {
    const auto it = u.find(t);
    if (it == u.end() || it->second.size() != pts.size())
      throw DomainError(fmt::format("{}: density and control disagree at t={}", dir.string(), t));
    TraceSample s;
    s.t = t;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      s.rho.push_back(pts[i].second);
      s.u.push_back(it->second[i].second);
    }
    trace.length = pts.back().first;
    trace.samples.push_back(std::move(s));
  }
  return trace;
}

}  // namespace vslctl
