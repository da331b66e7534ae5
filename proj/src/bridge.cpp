#include "ivdl/bridge.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ivdl/common.hpp"

namespace ivdl::bridge {

namespace {

void check_phi(double phi) {
  if (!(phi > 0.0 && phi < 1.0)) {
    throw DomainError("bridge parameter phi must lie in (0, 1), got " + std::to_string(phi));
  }
}

}  // namespace

double density(double u, double phi) {
  check_phi(phi);
  const double a = phi * std::numbers::pi;
  const double s = phi * std::abs(u);
  // cosh overflows past ~710; the density is 0 to double precision well before.
  if (s > 700.0) {
    return 0.0;
  }
  return std::sin(a) / (2.0 * std::numbers::pi * (std::cosh(s) + std::cos(a)));
}

double cdf(double u, double phi) {
  check_phi(phi);
  const double a = phi * std::numbers::pi;
  // tan(a v) = e^{phi u} sin(a) / (1 + e^{phi u} cos(a)); evaluate with the
  // smaller exponential to stay finite in both tails.
  if (u <= 0.0) {
    const double e = std::exp(phi * u);
    return std::atan2(e * std::sin(a), 1.0 + e * std::cos(a)) / a;
  }
  const double e = std::exp(-phi * u);
  return 1.0 - std::atan2(e * std::sin(a), 1.0 + e * std::cos(a)) / a;
}

double sample(double phi, double uniform_draw) {
  check_phi(phi);
  if (!(uniform_draw > 0.0 && uniform_draw < 1.0)) {
    throw DomainError("bridge inverse CDF needs a draw in the open interval (0, 1)");
  }
  const double a = phi * std::numbers::pi;
  return std::log(std::sin(a * uniform_draw) / std::sin(a * (1.0 - uniform_draw))) / phi;
}

}  // namespace ivdl::bridge
