#pragma once

#include <cmath>
#include <functional>

#include "targetpop/errors.hpp"

namespace targetpop {

// Bisection after automatic bracket expansion around [lo, hi]. The target
// functions here are monotone, so expansion always finds a sign change when
// a root exists.
inline double bisect_root(const std::function<double(double)>& f, double lo,
                          double hi, double param_tol = 1e-10) {
  double flo = f(lo);
  double fhi = f(hi);
  for (int k = 0; k < 80 && flo * fhi > 0.0; ++k) {
    const double width = hi - lo;
    lo -= width;
    hi += width;
    flo = f(lo);
    fhi = f(hi);
  }
  if (flo * fhi > 0.0)
    throw NumericalError("bisect_root: failed to bracket a sign change");
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  while (hi - lo > param_tol * std::max(1.0, std::abs(lo) + std::abs(hi))) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // interval at double resolution
    const double fmid = f(mid);
    if (fmid == 0.0) return mid;
    if (flo * fmid < 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fmid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace targetpop
