#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "vslctl/errors.hpp"

namespace vslctl {

/// Density sampled on the uniform grid x_i = i L / N, i = 0..N, together with
/// the set point it is measured against.
class DensityProfile {
 public:
  DensityProfile(double length, double rho_star, double rho_max, std::vector<double> values)
      : length_(length), rho_star_(rho_star), rho_max_(rho_max), values_(std::move(values)) {
    if (!(length_ > 0.0)) throw DomainError("profile length must be positive");
    if (values_.size() < 3) throw DomainError("profile needs at least 2 intervals");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const double v = values_[i];
      if (!(v > 0.0) || v > rho_max_ * (1.0 + 1e-12))
        throw DomainError(fmt::format("density {} at x={} outside (0, {}]", v, position(i),
                                      rho_max_));
    }
  }

  /// Samples `shape` on an N-interval grid.
  template <typename Fn>
  static DensityProfile sample(double length, std::size_t intervals, double rho_star,
                               double rho_max, Fn&& shape) {
    if (intervals < 2) throw DomainError("profile needs at least 2 intervals");
    std::vector<double> v(intervals + 1);
    for (std::size_t i = 0; i <= intervals; ++i)
      v[i] = shape(length * static_cast<double>(i) / static_cast<double>(intervals));
    return DensityProfile(length, rho_star, rho_max, std::move(v));
  }

  static DensityProfile uniform(double length, std::size_t intervals, double rho_star,
                                double rho_max) {
    return DensityProfile(length, rho_star, rho_max, std::vector<double>(intervals + 1, rho_star));
  }

  double length() const { return length_; }
  double rho_star() const { return rho_star_; }
  double rho_max() const { return rho_max_; }
  std::size_t intervals() const { return values_.size() - 1; }
  std::size_t size() const { return values_.size(); }
  double spacing() const { return length_ / static_cast<double>(intervals()); }
  double position(std::size_t i) const {
    return length_ * static_cast<double>(i) / static_cast<double>(intervals());
  }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  double min_value() const { return *std::min_element(values_.begin(), values_.end()); }

  /// Integral of (rho - rho*) over [0, x_i] for every grid index (composite trapezoid).
  std::vector<double> cumulative_deviations() const {
    std::vector<double> out(values_.size(), 0.0);
    const double h = spacing();
    for (std::size_t i = 1; i < values_.size(); ++i)
      out[i] = out[i - 1] + 0.5 * h * ((values_[i - 1] - rho_star_) + (values_[i] - rho_star_));
    return out;
  }

  /// Integral of (rho - rho*) over [0, x]; the partial cell uses the linear interpolant.
  double cumulative_deviation(double x) const {
    if (!(x >= 0.0) || x > length_ * (1.0 + 1e-14))
      throw DomainError(fmt::format("position {} outside [0, {}]", x, length_));
    x = std::min(x, length_);
    const double h = spacing();
    const std::size_t cell = std::min(static_cast<std::size_t>(x / h), intervals());
    double sum = 0.0;
    for (std::size_t i = 1; i <= cell; ++i)
      sum += 0.5 * h * ((values_[i - 1] - rho_star_) + (values_[i] - rho_star_));
    const double rest = x - position(cell);
    if (cell < intervals() && rest > 0.0) {
      const double at_x = values_[cell] + (values_[cell + 1] - values_[cell]) * rest / h;
      sum += 0.5 * rest * ((values_[cell] - rho_star_) + (at_x - rho_star_));
    }
    return sum;
  }

  /// max_i |rho(x_i) - rho*|.
  double sup_deviation() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v - rho_star_));
    return m;
  }

  /// max_i |rho_{i+1} - 2 rho_i + rho_{i-1}| / h^2, a smoothness witness for sampled data.
  double max_second_difference() const {
    const double h2 = spacing() * spacing();
    double m = 0.0;
    for (std::size_t i = 1; i + 1 < values_.size(); ++i)
      m = std::max(m, std::abs(values_[i + 1] - 2 * values_[i] + values_[i - 1]) / h2);
    return m;
  }

  /// max_i |rho_{i+1} - rho_i| / h.
  double max_gradient() const {
    const double h = spacing();
    double m = 0.0;
    for (std::size_t i = 1; i < values_.size(); ++i)
      m = std::max(m, std::abs(values_[i] - values_[i - 1]) / h);
    return m;
  }

 private:
  double length_;
  double rho_star_;
  double rho_max_;
  std::vector<double> values_;
};

inline double cumulative_deviation(const DensityProfile& p, double x) {
  return p.cumulative_deviation(x);
}
inline double sup_deviation(const DensityProfile& p) { return p.sup_deviation(); }

}  // namespace vslctl
