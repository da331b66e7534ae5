#pragma once

#include <cstdint>
#include <functional>

#include "ivdl/common.hpp"

namespace ivdl::learn {

// Design with a leading intercept column of ones, targets and strictly
// positive weights, all of length n.
struct WeightedRegressionProblem {
  Matrix design;
  Vector targets;
  Vector weights;

  static WeightedRegressionProblem from_inputs(const Matrix& inputs, const Vector& targets,
                                               const Vector& weights);

  Eigen::Index size() const { return targets.size(); }
  void validate() const;
};

// Prepends the column of ones.
Matrix with_intercept(const Matrix& inputs);

struct LinearFit {
  Vector beta;  // intercept first

  double predict(const Vector& x) const;
  Vector predict(const Matrix& inputs) const;
};

// Minimizes (1/n) sum w_i (t_i - x_i'b)^2 + ridge * ||b_{-0}||^2.
// Throws RankDeficiencyError for a singular system with ridge == 0.
LinearFit solve_wls(const WeightedRegressionProblem& problem, double ridge = 0.0);

// (1/n) sum w_i (t_i - x_i'b)^2 + lambda * ||b_{-0}||_1
double lasso_objective(const WeightedRegressionProblem& problem, const Vector& beta, double lambda);

// Smallest lambda for which every slope is zero.
double lasso_lambda_max(const WeightedRegressionProblem& problem);

struct LassoOptions {
  double tolerance = 1e-7;
  int max_sweeps = 100000;
  // Called with the objective after each full sweep when set.
  std::function<void(double)> sweep_observer;
};

// Cyclic coordinate descent with soft-thresholding. Columns are standardized
// internally; the objective and the returned coefficients are on the
// original scale. Throws ConvergenceError carrying the last iterate.
LinearFit fit_weighted_lasso(const WeightedRegressionProblem& problem, double lambda,
                             const LassoOptions& options = {},
                             const Vector* warm_start = nullptr);

struct LassoPath {
  Vector lambdas;     // decreasing
  Vector cv_error;    // weighted held-out MSE per lambda
  Eigen::Index best = 0;
  LinearFit fit;      // refit on all rows at lambdas[best]
};

// 50 log-spaced values from lambda_max down two decades, chosen by 5-fold
// weighted cross-validation. Fold assignment is deterministic in `seed`.
LassoPath fit_weighted_lasso_cv(const WeightedRegressionProblem& problem, std::uint64_t seed,
                                int folds = 5, int grid_size = 50, double decades = 2.0);

struct LogisticOptions {
  double gradient_tolerance = 1e-8;
  int max_iterations = 100;
  double ridge = 0.0;
  bool ridge_fallback = true;
};

struct LogisticFit {
  LinearFit linear;
  bool used_ridge_fallback = false;
  int iterations = 0;

  double probability(const Vector& x) const { return expit(linear.predict(x)); }
};

// Newton iterations on the weighted Bernoulli log-likelihood with labels in
// {-1, +1}. Throws SeparationError when a class is missing or coefficients
// diverge even after the ridge retry.
LogisticFit fit_logistic(const Matrix& inputs, const Eigen::VectorXi& labels,
                         const Vector* weights = nullptr, const LogisticOptions& options = {});

}  // namespace ivdl::learn
