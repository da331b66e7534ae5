#pragma once

namespace ivdl::bridge {

// Bridge(phi) distribution for 0 < phi < 1:
//   f(u) = sin(phi*pi) / (2*pi*(cosh(phi*u) + cos(phi*pi)))
// Symmetric about zero; for phi = 1/2 the density is 1/(2*pi*cosh(u/2)).
double density(double u, double phi);

// Closed-form CDF, inverse of `sample`.
double cdf(double u, double phi);

// Inverse-CDF draw: (1/phi) * log(sin(phi*pi*v) / sin(phi*pi*(1-v))).
// Throws DomainError unless 0 < phi < 1 and 0 < uniform_draw < 1.
double sample(double phi, double uniform_draw);

}  // namespace ivdl::bridge
