#pragma once

#include <functional>

namespace ivdl {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

// Adaptive 15-point Gauss-Kronrod integration of f over [lo, hi] to the
// given absolute tolerance. Throws NumericalError when the requested
// tolerance is not met.
QuadratureResult integrate(const std::function<double(double)>& f, double lo,
                           double hi, double abs_tol = 1e-8);

}  // namespace ivdl
