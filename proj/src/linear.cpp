#include "ivdl/linear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ivdl/rng.hpp"

namespace ivdl::learn {

Matrix with_intercept(const Matrix& inputs) {
  Matrix design(inputs.rows(), inputs.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(inputs.cols()) = inputs;
  return design;
}

WeightedRegressionProblem WeightedRegressionProblem::from_inputs(const Matrix& inputs,
                                                                 const Vector& targets,
                                                                 const Vector& weights) {
  WeightedRegressionProblem p{with_intercept(inputs), targets, weights};
  p.validate();
  return p;
}

void WeightedRegressionProblem::validate() const {
  const Eigen::Index n = targets.size();
  if (n < 1 || design.rows() != n || weights.size() != n) {
    throw DimensionError("design, targets and weights must share length n >= 1");
  }
  if (design.cols() < 1) {
    throw DimensionError("design needs at least the intercept column");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
      throw DomainError("weights must be strictly positive and finite (row " + std::to_string(i) +
                        ")");
    }
    if (!std::isfinite(targets[i])) {
      throw DomainError("targets must be finite (row " + std::to_string(i) + ")");
    }
  }
}

double LinearFit::predict(const Vector& x) const {
  if (x.size() + 1 != beta.size()) {
    throw DimensionError("expected " + std::to_string(beta.size() - 1) + " covariates, got " +
                         std::to_string(x.size()));
  }
  return beta[0] + beta.tail(beta.size() - 1).dot(x);
}

Vector LinearFit::predict(const Matrix& inputs) const {
  if (inputs.cols() + 1 != beta.size()) {
    throw DimensionError("expected " + std::to_string(beta.size() - 1) + " covariates, got " +
                         std::to_string(inputs.cols()));
  }
  Vector out = inputs * beta.tail(beta.size() - 1);
  out.array() += beta[0];
  return out;
}

LinearFit solve_wls(const WeightedRegressionProblem& problem, double ridge) {
  problem.validate();
  if (ridge < 0.0) {
    throw DomainError("ridge must be non-negative");
  }
  const Eigen::Index n = problem.size();
  const Eigen::Index k = problem.design.cols();
  if (ridge == 0.0) {
    const Vector root_w = problem.weights.cwiseSqrt();
    const Matrix scaled = root_w.asDiagonal() * problem.design;
    Eigen::ColPivHouseholderQR<Matrix> qr(scaled);
    qr.setThreshold(1e-12);
    if (qr.rank() < k) {
      throw RankDeficiencyError("weighted design has rank " + std::to_string(qr.rank()) +
                                " < " + std::to_string(k) + "; add a ridge penalty");
    }
    return {qr.solve(root_w.cwiseProduct(problem.targets))};
  }
  // X'WX + n*ridge*D with D = diag(0, 1, ..., 1).
  Matrix gram = problem.design.transpose() * problem.weights.asDiagonal() * problem.design;
  for (Eigen::Index j = 1; j < k; ++j) {
    gram(j, j) += static_cast<double>(n) * ridge;
  }
  const Vector rhs = problem.design.transpose() * problem.weights.cwiseProduct(problem.targets);
  Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw RankDeficiencyError("penalized normal equations are not positive definite");
  }
  return {ldlt.solve(rhs)};
}

double lasso_objective(const WeightedRegressionProblem& problem, const Vector& beta,
                       double lambda) {
  const Vector r = problem.targets - problem.design * beta;
  const double risk = problem.weights.dot(r.cwiseAbs2()) / static_cast<double>(problem.size());
  return risk + lambda * beta.tail(beta.size() - 1).cwiseAbs().sum();
}

double lasso_lambda_max(const WeightedRegressionProblem& problem) {
  problem.validate();
  const double n = static_cast<double>(problem.size());
  const double tbar = problem.weights.dot(problem.targets) / problem.weights.sum();
  const Vector centered = (problem.targets.array() - tbar).matrix();
  const Vector wc = problem.weights.cwiseProduct(centered);
  double best = 0.0;
  for (Eigen::Index j = 1; j < problem.design.cols(); ++j) {
    best = std::max(best, std::abs(2.0 / n * problem.design.col(j).dot(wc)));
  }
  return best;
}

namespace {

// Weighted standardization of the non-intercept columns.
struct Standardized {
  Matrix columns;  // n x p, weighted-centered and scaled
  Vector center;
  Vector scale;    // 0 for constant columns
};

Standardized standardize(const WeightedRegressionProblem& problem) {
  const Eigen::Index n = problem.size();
  const Eigen::Index p = problem.design.cols() - 1;
  const double wsum = problem.weights.sum();
  Standardized s{Matrix(n, p), Vector(p), Vector(p)};
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto col = problem.design.col(j + 1);
    const double m = problem.weights.dot(col) / wsum;
    Vector c = (col.array() - m).matrix();
    const double var = problem.weights.dot(c.cwiseAbs2()) / static_cast<double>(n);
    const double sd = std::sqrt(var);
    s.center[j] = m;
    if (sd > 1e-12 * (1.0 + std::abs(m))) {
      s.scale[j] = sd;
      s.columns.col(j) = c / sd;
    } else {
      s.scale[j] = 0.0;
      s.columns.col(j).setZero();
    }
  }
  return s;
}

double soft_threshold(double v, double t) {
  if (v > t) {
    return v - t;
  }
  if (v < -t) {
    return v + t;
  }
  return 0.0;
}

}  // namespace

LinearFit fit_weighted_lasso(const WeightedRegressionProblem& problem, double lambda,
                             const LassoOptions& options, const Vector* warm_start) {
  problem.validate();
  if (!(lambda > 0.0)) {
    throw DomainError("lasso lambda must be positive");
  }
  const Eigen::Index n = problem.size();
  const Eigen::Index p = problem.design.cols() - 1;
  const double nd = static_cast<double>(n);
  const Standardized s = standardize(problem);
  const Vector& w = problem.weights;
  const double wsum = w.sum();

  // Standardized coordinates: slopes gamma_j = beta_j * scale_j, intercept b0
  // absorbs the centering.
  Vector gamma = Vector::Zero(p);
  double b0 = w.dot(problem.targets) / wsum;
  if (warm_start != nullptr && warm_start->size() == p + 1) {
    for (Eigen::Index j = 0; j < p; ++j) {
      gamma[j] = s.scale[j] > 0.0 ? (*warm_start)[j + 1] * s.scale[j] : 0.0;
    }
    b0 = (*warm_start)[0] + (*warm_start).tail(p).dot(s.center);
  }
  Vector curv(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    curv[j] = w.dot(s.columns.col(j).cwiseAbs2()) / nd;
  }
  Vector resid = problem.targets - s.columns * gamma;
  resid.array() -= b0;

  auto to_original = [&]() {
    Vector beta(p + 1);
    double intercept = b0;
    for (Eigen::Index j = 0; j < p; ++j) {
      beta[j + 1] = s.scale[j] > 0.0 ? gamma[j] / s.scale[j] : 0.0;
      intercept -= beta[j + 1] * s.center[j];
    }
    beta[0] = intercept;
    return beta;
  };

  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    double max_change = 0.0;
    // Intercept: exact minimization is the weighted mean of the residual.
    const double shift = w.dot(resid) / wsum;
    if (shift != 0.0) {
      b0 += shift;
      resid.array() -= shift;
      max_change = std::abs(shift);
    }
    for (Eigen::Index j = 0; j < p; ++j) {
      if (s.scale[j] == 0.0) {
        continue;
      }
      const auto col = s.columns.col(j);
      const double rho = col.dot(w.cwiseProduct(resid)) / nd + curv[j] * gamma[j];
      const double updated = soft_threshold(rho, lambda / (2.0 * s.scale[j])) / curv[j];
      const double diff = updated - gamma[j];
      if (diff != 0.0) {
        resid -= diff * col;
        gamma[j] = updated;
        max_change = std::max(max_change, std::abs(diff) / s.scale[j]);
      }
    }
    if (options.sweep_observer) {
      options.sweep_observer(lasso_objective(problem, to_original(), lambda));
    }
    if (max_change < options.tolerance) {
      return {to_original()};
    }
  }
  throw ConvergenceError("lasso coordinate descent did not converge in " +
                             std::to_string(options.max_sweeps) + " sweeps",
                         to_original());
}

LassoPath fit_weighted_lasso_cv(const WeightedRegressionProblem& problem, std::uint64_t seed,
                                int folds, int grid_size, double decades) {
  problem.validate();
  const Eigen::Index n = problem.size();
  if (folds < 2 || n < folds) {
    throw DomainError("cross-validation needs at least 2 folds and one row per fold");
  }
  LassoPath path;
  const double lmax = lasso_lambda_max(problem);
  const double top = lmax > 0.0 ? lmax : 1e-8;
  path.lambdas.resize(grid_size);
  for (int k = 0; k < grid_size; ++k) {
    const double frac = grid_size == 1 ? 0.0 : static_cast<double>(k) / (grid_size - 1);
    path.lambdas[k] = top * std::pow(10.0, -decades * frac);
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < order.size(); ++k) {
    fold_of[static_cast<std::size_t>(order[k])] = static_cast<int>(k % static_cast<std::size_t>(folds));
  }

  path.cv_error = Vector::Zero(grid_size);
  double total_weight = 0.0;
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
    for (Eigen::Index i = 0; i < n; ++i) {
      (fold_of[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
    }
    WeightedRegressionProblem sub;
    sub.design.resize(static_cast<Eigen::Index>(train.size()), problem.design.cols());
    sub.targets.resize(static_cast<Eigen::Index>(train.size()));
    sub.weights.resize(static_cast<Eigen::Index>(train.size()));
    for (std::size_t k = 0; k < train.size(); ++k) {
      const auto r = train[k];
      const auto kk = static_cast<Eigen::Index>(k);
      sub.design.row(kk) = problem.design.row(r);
      sub.targets[kk] = problem.targets[r];
      sub.weights[kk] = problem.weights[r];
    }
    Vector warm;
    for (int k = 0; k < grid_size; ++k) {
      const LinearFit fit = fit_weighted_lasso(sub, path.lambdas[k], {}, k == 0 ? nullptr : &warm);
      warm = fit.beta;
      for (const auto r : test) {
        const double e = problem.targets[r] - problem.design.row(r).dot(fit.beta);
        path.cv_error[k] += problem.weights[r] * e * e;
      }
    }
    for (const auto r : test) {
      total_weight += problem.weights[r];
    }
  }
  path.cv_error /= total_weight;
  path.cv_error.minCoeff(&path.best);
  path.fit = fit_weighted_lasso(problem, path.lambdas[path.best]);
  return path;
}

namespace {

struct LogisticAttempt {
  Vector beta;
  bool converged = false;
  bool diverged = false;
  int iterations = 0;
};

LogisticAttempt newton_logistic(const Matrix& design, const Vector& y01, const Vector& w,
                                double ridge, const LogisticOptions& options) {
  const Eigen::Index k = design.cols();
  const double wsum = w.sum();
  LogisticAttempt out;
  out.beta = Vector::Zero(k);
  const double pbar = std::clamp(w.dot(y01) / wsum, 1e-12, 1.0 - 1e-12);
  out.beta[0] = logit(pbar);

  auto objective = [&](const Vector& beta) {
    const Vector eta = design * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      // log(1 + e^eta) computed stably
      const double e = eta[i];
      const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
      ll += w[i] * (y01[i] * e - softplus);
    }
    return ll / wsum - 0.5 * ridge * beta.tail(k - 1).squaredNorm();
  };

  double current = objective(out.beta);
  for (int it = 0; it < options.max_iterations; ++it) {
    out.iterations = it + 1;
    const Vector eta = design * out.beta;
    Vector prob(eta.size());
    Vector curvature(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      prob[i] = expit(eta[i]);
      curvature[i] = w[i] * prob[i] * (1.0 - prob[i]);
    }
    Vector grad = design.transpose() * w.cwiseProduct(y01 - prob) / wsum;
    grad.tail(k - 1) -= ridge * out.beta.tail(k - 1);
    if (grad.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      out.converged = true;
      break;
    }
    Matrix hess = design.transpose() * curvature.asDiagonal() * design / wsum;
    for (Eigen::Index j = 1; j < k; ++j) {
      hess(j, j) += ridge;
    }
    Eigen::LDLT<Matrix> ldlt(hess);
    Vector step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      out.diverged = true;
      break;
    }
    double scale = 1.0;
    Vector candidate = out.beta + step;
    double value = objective(candidate);
    while (!(value >= current) && scale > 1e-10) {
      scale *= 0.5;
      candidate = out.beta + scale * step;
      value = objective(candidate);
    }
    out.beta = candidate;
    current = value;
    // Separation: the likelihood approaches its supremum only as |eta| -> inf.
    if (ridge == 0.0 && (design * out.beta).cwiseAbs().maxCoeff() > 30.0 && current > -1e-6) {
      out.diverged = true;
      break;
    }
  }
  if (!out.beta.allFinite()) {
    out.diverged = true;
  }
  return out;
}

}  // namespace

LogisticFit fit_logistic(const Matrix& inputs, const Eigen::VectorXi& labels, const Vector* weights,
                         const LogisticOptions& options) {
  const Eigen::Index n = inputs.rows();
  if (labels.size() != n || (weights != nullptr && weights->size() != n)) {
    throw DimensionError("logistic inputs, labels and weights must share length n");
  }
  Vector y01(n);
  bool has_pos = false;
  bool has_neg = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[i] == 1) {
      y01[i] = 1.0;
      has_pos = true;
    } else if (labels[i] == -1) {
      y01[i] = 0.0;
      has_neg = true;
    } else {
      throw DomainError("logistic labels must be +1/-1");
    }
  }
  if (!has_pos || !has_neg) {
    throw SeparationError("logistic regression needs both classes present");
  }
  const Vector w = weights != nullptr ? *weights : Vector::Ones(n);
  if ((w.array() <= 0.0).any() || !w.allFinite()) {
    throw DomainError("logistic weights must be strictly positive and finite");
  }
  const Matrix design = with_intercept(inputs);

  LogisticAttempt attempt = newton_logistic(design, y01, w, options.ridge, options);
  LogisticFit fit;
  if (attempt.converged && !attempt.diverged) {
    fit.linear.beta = attempt.beta;
    fit.iterations = attempt.iterations;
    return fit;
  }
  if (options.ridge_fallback && options.ridge < 1e-6) {
    LogisticOptions retry = options;
    retry.ridge = 1e-6;
    retry.max_iterations = std::max(options.max_iterations, 200);
    attempt = newton_logistic(design, y01, w, retry.ridge, retry);
    if (attempt.converged) {
      fit.linear.beta = attempt.beta;
      fit.iterations = attempt.iterations;
      fit.used_ridge_fallback = true;
      return fit;
    }
  }
  throw SeparationError(
      "logistic regression coefficients diverge (perfect or quasi separation); "
      "use a ridge penalty or a forest learner");
}

}  // namespace ivdl::learn
