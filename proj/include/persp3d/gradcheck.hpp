#pragma once

#include "persp3d/common.hpp"

#include <algorithm>
#include <utility>

namespace persp3d {

/// Compare the analytic gradient of f against central finite differences.
///
/// f is called as f(x, grad_ptr) -> value; grad_ptr is null for the
/// difference evaluations. The step is scaled per coordinate by
/// max(1, |x_i|). Returns the worst relative error over coordinates, with
/// denominator max(|fd|, |analytic|, 1e-8). Throws NonFinite when any
/// evaluation is not finite.
template <typename F>
double grad_check(F&& f, Eigen::VectorXd x, double step = 1e-5) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(x.size());
  const double value = f(x, &grad);
  if (!std::isfinite(value)) throw NonFinite("grad_check: loss not finite at x");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x[i]));
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x, nullptr);
    x[i] = xi - h;
    const double fm = f(x, nullptr);
    x[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NonFinite("grad_check: loss not finite near x");
    }
    const double fd = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
    worst = std::max(worst, std::abs(fd - grad[i]) / denom);
  }
  return worst;
}

}  // namespace persp3d
