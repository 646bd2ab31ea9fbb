#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "vslctl/errors.hpp"
#include "vslctl/roots.hpp"

namespace vslctl {

/// Parameters of the exponential flow-density family
///   F(rho, l) = A rho l exp(-(b rho / (1 + a - a l))^gamma / gamma).
struct ExponentialFamily {
  double A = 1.0;      // flow scale
  double b = 1.0;      // inverse density scale
  double gamma = 1.0;  // shape
  double a = 0.0;      // speed-limit sensitivity
};

/// f, f' and f'' sampled on a uniform grid over [0, rho_max].
struct TabulatedDiagram {
  std::vector<double> f;
  std::vector<double> df;
  std::vector<double> d2f;
};

/// The flow-density map f and its speed-limit family F(rho, l).
///
/// Exponential diagrams are evaluated in closed form. Tabulated diagrams
/// interpolate f with cubic Hermite polynomials built from (f, f'), f' with
/// cubic Hermite polynomials built from (f', f''), and f'' linearly, so the sign
/// of f'' between nodes is that of its nodal values. A tabulated diagram carries
/// no speed-limit model of its own; it uses F(rho, l) = l f(rho).
class FundamentalDiagram {
 public:
  using Kind = std::variant<ExponentialFamily, TabulatedDiagram>;

  static FundamentalDiagram exponential(ExponentialFamily params, double rho_max) {
    if (!(params.A > 0.0) || !(params.b > 0.0) || !(params.gamma > 0.0) || !(params.a >= 0.0))
      throw DomainError("exponential diagram requires A, b, gamma > 0 and a >= 0");
    return FundamentalDiagram(Kind{params}, rho_max);
  }

  static FundamentalDiagram tabulated(TabulatedDiagram table, double rho_max) {
    const std::size_t n = table.f.size();
    if (n < 3 || table.df.size() != n || table.d2f.size() != n)
      throw DomainError("tabulated diagram needs >= 3 nodes with f, f', f'' of equal length");
    return FundamentalDiagram(Kind{std::move(table)}, rho_max);
  }

  /// Tabulates closed-form f, f', f'' on n uniform nodes of [0, rho_max].
  static FundamentalDiagram sample(double rho_max, std::size_t n,
                                   const std::function<double(double)>& f,
                                   const std::function<double(double)>& df,
                                   const std::function<double(double)>& d2f) {
    if (n < 3) throw DomainError("tabulated diagram needs >= 3 nodes");
    TabulatedDiagram t;
    t.f.resize(n);
    t.df.resize(n);
    t.d2f.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double rho = rho_max * static_cast<double>(j) / static_cast<double>(n - 1);
      t.f[j] = f(rho);
      t.df[j] = df(rho);
      t.d2f[j] = d2f(rho);
    }
    return tabulated(std::move(t), rho_max);
  }

  const Kind& kind() const { return kind_; }
  bool is_exponential() const { return std::holds_alternative<ExponentialFamily>(kind_); }
  double rho_max() const { return rho_max_; }

  /// f(rho) = F(rho, 1).
  double flow(double rho) const {
    check_density(rho);
    if (const auto* e = std::get_if<ExponentialFamily>(&kind_)) {
      if (rho == 0.0) return 0.0;
      const double s = std::pow(e->b * rho, e->gamma);
      return e->A * rho * std::exp(-s / e->gamma);
    }
    return hermite(std::get<TabulatedDiagram>(kind_).f, std::get<TabulatedDiagram>(kind_).df, rho);
  }

  /// f'(rho).
  double slope(double rho) const {
    check_density(rho);
    if (const auto* e = std::get_if<ExponentialFamily>(&kind_)) {
      const double s = std::pow(e->b * rho, e->gamma);
      return e->A * std::exp(-s / e->gamma) * (1.0 - s);
    }
    return hermite(std::get<TabulatedDiagram>(kind_).df, std::get<TabulatedDiagram>(kind_).d2f,
                   rho);
  }

  /// f''(rho). For gamma < 1 the exponential family diverges to -inf at rho = 0.
  double curvature(double rho) const {
    check_density(rho);
    if (const auto* e = std::get_if<ExponentialFamily>(&kind_)) {
      const double s = std::pow(e->b * rho, e->gamma);
      return -e->A * std::exp(-s / e->gamma) * std::pow(e->b, e->gamma) *
             std::pow(rho, e->gamma - 1.0) * (1.0 + e->gamma - s);
    }
    return linear(std::get<TabulatedDiagram>(kind_).d2f, rho);
  }

  /// F(rho, l) for a speed-limit ratio l in (0, 1].
  double vsl_flow(double rho, double l) const {
    check_density(rho);
    check_ratio(l);
    if (const auto* e = std::get_if<ExponentialFamily>(&kind_)) {
      if (rho == 0.0) return 0.0;
      // 1 + a (1 - l) is exactly 1 at l = 1, so F(rho, 1) reproduces f bit for bit.
      const double scaled = e->b * rho / (1.0 + e->a * (1.0 - l));
      return e->A * rho * l * std::exp(-std::pow(scaled, e->gamma) / e->gamma);
    }
    return l * flow(rho);
  }

  /// dF/dl(rho, l).
  double vsl_sensitivity(double rho, double l) const {
    check_density(rho);
    check_ratio(l);
    if (const auto* e = std::get_if<ExponentialFamily>(&kind_)) {
      if (rho == 0.0) return 0.0;
      const double denom = 1.0 + e->a * (1.0 - l);
      const double br = std::pow(e->b * rho, e->gamma);
      const double expo = std::exp(-std::pow(e->b * rho / denom, e->gamma) / e->gamma);
      return e->A * rho * expo * (1.0 - e->a * l * br / std::pow(denom, 1.0 + e->gamma));
    }
    return flow(rho);
  }

  /// The density where f' changes sign. Throws AssumptionViolation if f' keeps
  /// one sign on [0, rho_max].
  double critical_density() const {
    if (!rho_cr_)
      throw AssumptionViolation("f' does not change sign on [0, rho_max]: no critical density");
    return *rho_cr_;
  }

  bool has_critical_density() const { return rho_cr_.has_value(); }

  /// Capacity q_max = f(rho_cr).
  double capacity() const { return flow(critical_density()); }

  /// Largest delta such that speed limits reduce the flow on (0, delta].
  double delta() const {
    if (const auto* e = std::get_if<ExponentialFamily>(&kind_)) {
      if (e->a * std::pow(e->b * rho_max_, e->gamma) <= 1.0) return rho_max_;
      return 1.0 / (e->b * std::pow(e->a, 1.0 / e->gamma));
    }
    return rho_max_;
  }

  /// Smallest l in (0, 1] with F(rho, l) = F(rho, 1).
  double ltilde(double rho) const {
    check_density(rho);
    if (!(rho > 0.0)) throw DomainError("ltilde requires rho > 0");
    rho = std::min(rho, rho_max_);
    const auto* e = std::get_if<ExponentialFamily>(&kind_);
    if (e == nullptr || rho <= delta()) return 1.0;

    // F(rho, .) increases up to the root of dF/dl and decreases after it, so the
    // smallest crossing lies below that peak.
    const double br = std::pow(e->b * rho, e->gamma);
    auto peak_eq = [&](double l) {
      return e->a * l * br / std::pow(1.0 + e->a * (1.0 - l), 1.0 + e->gamma) - 1.0;
    };
    const auto peak = bisect(peak_eq, 0.0, 1.0);
    if (!peak) throw AssumptionViolation(fmt::format("no speed-limit flow peak at rho={}", rho));

    auto crossing = [&](double l) {
      return std::pow(1.0 + e->a * (1.0 - l), e->gamma) * (1.0 + e->gamma / br * std::log(l)) - 1.0;
    };
    constexpr double kFloor = 1e-9;
    constexpr int kScan = 400;
    double prev_l = kFloor;
    if (crossing(prev_l) >= 0.0)
      throw AssumptionViolation(fmt::format("ltilde root below {} at rho={}", kFloor, rho));
    for (int i = 1; i <= kScan; ++i) {
      const double l = kFloor * std::pow(*peak / kFloor, static_cast<double>(i) / kScan);
      const double h = crossing(l);
      if (h >= 0.0) {
        const auto root = bisect(crossing, prev_l, l);
        if (root) return *root;
        break;
      }
      prev_l = l;
    }
    throw AssumptionViolation(fmt::format("no ltilde root found on (0, 1) at rho={}", rho));
  }

  /// g(rho, y): the speed-limit ratio l in (0, ltilde(rho)] with F(rho, l) = y.
  double invert_vsl(double rho, double y) const {
    check_density(rho);
    if (!(rho > 0.0)) throw DomainError("invert_vsl requires rho > 0");
    const double full = flow(rho);
    if (!(y > 0.0) || y > full * (1.0 + 1e-14))
      throw DomainError(fmt::format("flow {} outside (0, f(rho)={}]", y, full));
    const double top = ltilde(rho);
    if (y >= full) return top;
    auto residual = [&](double l) { return l == 0.0 ? -y : vsl_flow(rho, l) - y; };
    const auto l = bisect(residual, 0.0, top);
    if (!l) throw AssumptionViolation("speed-limit flow not bracketed on (0, ltilde]");
    return *l;
  }

  /// max |f'| on [0, rho_max].
  double lipschitz_constant() const {
    constexpr int kGrid = 2001;
    double best = 0.0;
    for (int j = 0; j < kGrid; ++j) {
      const double rho = rho_max_ * j / (kGrid - 1.0);
      best = std::max(best, std::abs(slope(rho)));
    }
    return best;
  }

 private:
  FundamentalDiagram(Kind kind, double rho_max) : kind_(std::move(kind)), rho_max_(rho_max) {
    if (!(rho_max > 0.0)) throw DomainError("rho_max must be positive");
    auto fp = [this](double rho) { return slope(rho); };
    if (slope(0.0) > 0.0 && slope(rho_max_) < 0.0) rho_cr_ = bisect(fp, 0.0, rho_max_);
  }

  void check_density(double rho) const {
    if (!(rho >= 0.0) || rho > rho_max_ * (1.0 + 1e-12))
      throw DomainError(fmt::format("density {} outside [0, {}]", rho, rho_max_));
  }

  static void check_ratio(double l) {
    if (!(l > 0.0) || l > 1.0 + 1e-12)
      throw DomainError(fmt::format("speed-limit ratio {} outside (0, 1]", l));
  }

  std::pair<std::size_t, double> locate(std::size_t n, double rho) const {
    const double h = rho_max_ / static_cast<double>(n - 1);
    const double pos = std::clamp(rho / h, 0.0, static_cast<double>(n - 1));
    const std::size_t j = std::min(static_cast<std::size_t>(pos), n - 2);
    return {j, pos - static_cast<double>(j)};
  }

  double hermite(const std::vector<double>& v, const std::vector<double>& dv, double rho) const {
    const auto [j, s] = locate(v.size(), rho);
    const double h = rho_max_ / static_cast<double>(v.size() - 1);
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * v[j] + (s3 - 2 * s2 + s) * h * dv[j] +
           (-2 * s3 + 3 * s2) * v[j + 1] + (s3 - s2) * h * dv[j + 1];
  }

  double linear(const std::vector<double>& v, double rho) const {
    const auto [j, s] = locate(v.size(), rho);
    return (1.0 - s) * v[j] + s * v[j + 1];
  }

  Kind kind_;
  double rho_max_;
  std::optional<double> rho_cr_;
};

// Free-function spellings of the diagram queries.
inline double flow(const FundamentalDiagram& d, double rho) { return d.flow(rho); }
inline double vsl_flow(const FundamentalDiagram& d, double rho, double l) {
  return d.vsl_flow(rho, l);
}
inline double critical_density(const FundamentalDiagram& d) { return d.critical_density(); }
inline double delta_threshold(const FundamentalDiagram& d) { return d.delta(); }
inline double ltilde(const FundamentalDiagram& d, double rho) { return d.ltilde(rho); }
inline double invert_vsl(const FundamentalDiagram& d, double rho, double y) {
  return d.invert_vsl(rho, y);
}

struct AssumptionCheck {
  std::string name;
  bool passed = true;
  std::optional<double> first_violation;  // density of the first failing sample
  std::string detail;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }

  const AssumptionCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

/// Samples [0, rho_max] on n_samples points and checks the structural
/// assumptions on f and F. Failures are reported, never thrown.
inline AssumptionReport validate_assumptions(const FundamentalDiagram& d, std::size_t n_samples) {
  if (n_samples < 3) throw DomainError("validate_assumptions needs n_samples >= 3");
  std::vector<double> grid(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i)
    grid[i] = d.rho_max() * static_cast<double>(i) / static_cast<double>(n_samples - 1);
  grid.back() = d.rho_max();

  AssumptionReport report;
  auto fail = [](AssumptionCheck& c, double rho, std::string detail) {
    if (!c.passed) return;
    c.passed = false;
    c.first_violation = rho;
    c.detail = std::move(detail);
  };

  AssumptionCheck origin{"flow_zero_at_origin", true, std::nullopt, ""};
  if (std::abs(d.flow(0.0)) > 1e-12) fail(origin, 0.0, fmt::format("f(0) = {}", d.flow(0.0)));
  report.checks.push_back(origin);

  AssumptionCheck positive{"flow_positive", true, std::nullopt, ""};
  for (std::size_t i = 1; i < n_samples; ++i)
    if (!(d.flow(grid[i]) > 0.0)) fail(positive, grid[i], fmt::format("f = {}", d.flow(grid[i])));
  report.checks.push_back(positive);

  // f' > 0 up to a single sign change strictly inside (0, rho_max), negative after.
  AssumptionCheck slope{"slope_sign_pattern", true, std::nullopt, ""};
  bool descending = false;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double s = d.slope(grid[i]);
    if (!descending && s <= 0.0) {
      if (i == 0) fail(slope, grid[i], fmt::format("f'(0) = {} is not positive", s));
      descending = true;
    } else if (descending && s > 0.0) {
      fail(slope, grid[i], fmt::format("f' turns positive again ({})", s));
    }
  }
  if (!descending)
    fail(slope, d.rho_max(), "f' never vanishes: no critical density below rho_max");
  report.checks.push_back(slope);

  AssumptionCheck concave{"strict_concavity", true, std::nullopt, ""};
  for (double rho : grid)
    if (!(d.curvature(rho) < 0.0)) fail(concave, rho, fmt::format("f'' = {}", d.curvature(rho)));
  report.checks.push_back(concave);

  AssumptionCheck monotone{"speed_limit_monotone", true, std::nullopt, ""};
  constexpr int kRatioSamples = 16;
  for (std::size_t i = 1; i < n_samples && monotone.passed; ++i) {
    try {
      const double top = d.ltilde(grid[i]);
      for (int j = 1; j <= kRatioSamples; ++j) {
        const double l = top * j / (kRatioSamples + 1.0);
        if (!(d.vsl_sensitivity(grid[i], l) > 0.0)) {
          fail(monotone, grid[i], fmt::format("dF/dl <= 0 at l = {}", l));
          break;
        }
      }
    } catch (const AssumptionViolation& err) {
      fail(monotone, grid[i], err.what());
    }
  }
  report.checks.push_back(monotone);
  return report;
}

}  // namespace vslctl
