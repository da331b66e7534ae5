#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ivdl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error hierarchy. Every failure the library reports derives from Error so
// callers can catch at one level and still branch on the concrete kind.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class SeparationError : public Error {
 public:
  using Error::Error;
};

class DegenerateInstrumentError : public Error {
 public:
  using Error::Error;
};

// Malformed user input: CSV files, config documents, column roles.
class ParseError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Vector last_iterate)
      : Error(what), last_iterate_(std::move(last_iterate)) {}
  const Vector& last_iterate() const { return last_iterate_; }

 private:
  Vector last_iterate_;
};

inline double expit(double t) {
  if (t >= 0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// sign(0) := +1
inline int sign_of(double v) { return v < 0.0 ? -1 : 1; }

// Observed records (Y, X, A, Z). Treatment and instrument use the +1/-1 coding.
struct ObservedDataset {
  Vector y;
  Matrix x;
  Eigen::VectorXi a;
  Eigen::VectorXi z;

  Eigen::Index size() const { return y.size(); }
  Eigen::Index dim() const { return x.cols(); }

  // Throws DimensionError / DomainError when the invariants are broken.
  void validate() const;

  ObservedDataset subset(const std::vector<Eigen::Index>& rows) const;
};

}  // namespace ivdl
