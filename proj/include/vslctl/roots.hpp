#pragma once

#include <cmath>
#include <optional>

namespace vslctl {

struct RootSettings {
  double tol = 1e-12;
  int max_iter = 200;
};

/// Bisection on [lo, hi]. Returns nullopt when fn(lo) and fn(hi) share a strict sign.
/// An endpoint where fn vanishes is returned as is.
template <typename Fn>
std::optional<double> bisect(Fn&& fn, double lo, double hi, RootSettings settings = {}) {
  double flo = fn(lo);
  double fhi = fn(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) return std::nullopt;
  for (int it = 0; it < settings.max_iter && hi - lo > settings.tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = fn(mid);
    if (fmid == 0.0) return mid;
    if ((fmid > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace vslctl
