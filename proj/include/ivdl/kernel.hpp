#pragma once

#include <cstdint>

#include "ivdl/common.hpp"

namespace ivdl::learn {

// Gaussian kernel exp(-||x - x'||^2 / (2 bandwidth^2)).
double gaussian_kernel(const Vector& a, const Vector& b, double bandwidth);
Matrix gaussian_kernel_matrix(const Matrix& rows, const Matrix& anchors, double bandwidth);

// Median pairwise Euclidean distance between distinct rows.
double median_heuristic_bandwidth(const Matrix& inputs);

struct KernelFit {
  Matrix anchors;
  Vector dual_beta;
  double intercept = 0.0;
  double bandwidth = 1.0;

  double predict(const Vector& x) const;
  Vector predict(const Matrix& inputs) const;
};

// Weights are rescaled to mean one before solving, so the fit depends on
// the weights only through their relative sizes.
Vector normalized_weights(const Vector& weights);

// Minimizes (1/n) sum w_i (t_i - K_i'b - b0)^2 + lambda b'Kb with weights
// normalized to mean one. bandwidth <= 0 selects the median heuristic.
// Throws NumericalError when the system stays singular after jitter.
KernelFit fit_weighted_krr(const Matrix& inputs, const Vector& targets, const Vector& weights,
                           double lambda, double bandwidth = 0.0);

// The objective above evaluated at an arbitrary (dual_beta, intercept) on the
// training anchors; used to check optimality.
double krr_objective(const KernelFit& fit, const Vector& targets, const Vector& weights,
                     double lambda);

struct KrrSelection {
  Vector lambdas;
  Vector cv_error;
  Eigen::Index best = 0;
  KernelFit fit;
};

// Lambda chosen by weighted K-fold cross-validation over a log grid.
KrrSelection fit_weighted_krr_cv(const Matrix& inputs, const Vector& targets,
                                 const Vector& weights, std::uint64_t seed,
                                 double bandwidth = 0.0, int folds = 5);

}  // namespace ivdl::learn
