#pragma once

#include <cmath>
#include <functional>

#include "logsde/common.hpp"

namespace logsde {

// Adaptive Simpson with absolute tolerance and a hard recursion cap.
// Integrands here are smooth away from the endpoints; callers substitute
// variables before integrating anything singular.
class AdaptiveSimpson {
 public:
  explicit AdaptiveSimpson(double abs_tol = 1e-10, int max_depth = 40)
      : tol_(abs_tol), max_depth_(max_depth) {}

  template <class F>
  double integrate(F&& f, double a, double b) const {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return recurse(f, a, b, fa, fm, fb, whole, tol_, max_depth_);
  }

 private:
  template <class F>
  static double recurse(F&& f, double a, double b, double fa, double fm, double fb, double whole,
                        double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * eps)
      return left + right + delta / 15.0;
    return recurse(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
           recurse(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
  }

  double tol_;
  int max_depth_;
};

}  // namespace logsde
