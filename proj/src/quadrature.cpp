#include "ivdl/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <string>

#include "ivdl/common.hpp"

namespace ivdl {

QuadratureResult integrate(const std::function<double(double)>& f, double lo,
                           double hi, double abs_tol) {
  using boost::math::quadrature::gauss_kronrod;
  double error = 0.0;
  double l1 = 0.0;
  // Boost terminates on a relative criterion; ask for far more than needed
  // and check the absolute error afterwards.
  const double value = gauss_kronrod<double, 15>::integrate(f, lo, hi, 25, 1e-13, &error, &l1);
  if (!std::isfinite(value) || error > abs_tol) {
    throw NumericalError("quadrature did not converge: error estimate " + std::to_string(error) +
                         " exceeds tolerance " + std::to_string(abs_tol));
  }
  return {value, error};
}

}  // namespace ivdl
