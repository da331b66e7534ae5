#include "ivdl/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ivdl/rng.hpp"

namespace ivdl::learn {

double gaussian_kernel(const Vector& a, const Vector& b, double bandwidth) {
  return std::exp(-(a - b).squaredNorm() / (2.0 * bandwidth * bandwidth));
}

Matrix gaussian_kernel_matrix(const Matrix& rows, const Matrix& anchors, double bandwidth) {
  if (rows.cols() != anchors.cols()) {
    throw DimensionError("kernel inputs have " + std::to_string(rows.cols()) +
                         " columns, anchors have " + std::to_string(anchors.cols()));
  }
  const Vector rn = rows.rowwise().squaredNorm();
  const Vector an = anchors.rowwise().squaredNorm();
  Matrix k = -2.0 * rows * anchors.transpose();
  k.colwise() += rn;
  k.rowwise() += an.transpose();
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  return (k.array().max(0.0) * scale).exp().matrix();
}

double median_heuristic_bandwidth(const Matrix& inputs) {
  const Eigen::Index n = inputs.rows();
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (inputs.row(i) - inputs.row(j)).norm();
      if (d > 0.0) {
        dist.push_back(d);
      }
    }
  }
  if (dist.empty()) {
    return 1.0;
  }
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  if (dist.size() % 2 == 1) {
    return *mid;
  }
  const double upper = *mid;
  const double lower = *std::max_element(dist.begin(), mid);
  return 0.5 * (lower + upper);
}

double KernelFit::predict(const Vector& x) const {
  if (x.size() != anchors.cols()) {
    throw DimensionError("expected " + std::to_string(anchors.cols()) + " covariates, got " +
                         std::to_string(x.size()));
  }
  double total = intercept;
  for (Eigen::Index j = 0; j < anchors.rows(); ++j) {
    total += dual_beta[j] * gaussian_kernel(x, anchors.row(j).transpose(), bandwidth);
  }
  return total;
}

Vector KernelFit::predict(const Matrix& inputs) const {
  Vector out = gaussian_kernel_matrix(inputs, anchors, bandwidth) * dual_beta;
  out.array() += intercept;
  return out;
}

Vector normalized_weights(const Vector& weights) {
  return weights * (static_cast<double>(weights.size()) / weights.sum());
}

KernelFit fit_weighted_krr(const Matrix& inputs, const Vector& targets, const Vector& weights,
                           double lambda, double bandwidth) {
  const Eigen::Index n = inputs.rows();
  if (n < 2) {
    throw DomainError("kernel ridge regression needs n >= 2");
  }
  if (targets.size() != n || weights.size() != n) {
    throw DimensionError("inputs, targets and weights must share length n");
  }
  if (!(lambda > 0.0)) {
    throw DomainError("kernel ridge lambda must be positive");
  }
  if ((weights.array() <= 0.0).any() || !weights.allFinite()) {
    throw DomainError("weights must be strictly positive and finite");
  }
  KernelFit fit;
  fit.anchors = inputs;
  fit.bandwidth = bandwidth > 0.0 ? bandwidth : median_heuristic_bandwidth(inputs);
  const Vector w = normalized_weights(weights);

  // Stationarity of the joint objective in (b, b0):
  //   (K + n*lambda*W^{-1}) b + b0 1 = t,   1'b = 0.
  // M = K + n*lambda*W^{-1} is symmetric positive definite; eliminate b0
  // through the Schur complement.
  Matrix m = gaussian_kernel_matrix(inputs, inputs, fit.bandwidth);
  m.diagonal() += static_cast<double>(n) * lambda * w.cwiseInverse();
  double jitter = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() == Eigen::Success) {
      const Vector a = llt.solve(targets);
      const Vector b = llt.solve(Vector::Ones(n));
      const double denom = b.sum();
      if (std::isfinite(denom) && denom != 0.0 && a.allFinite() && b.allFinite()) {
        fit.intercept = a.sum() / denom;
        fit.dual_beta = a - fit.intercept * b;
        return fit;
      }
    }
    const double next = jitter == 0.0 ? 1e-10 : jitter * 100.0;
    m.diagonal().array() += next - jitter;
    jitter = next;
  }
  throw NumericalError("kernel ridge system is singular even after diagonal jitter");
}

double krr_objective(const KernelFit& fit, const Vector& targets, const Vector& weights,
                     double lambda) {
  const Matrix k = gaussian_kernel_matrix(fit.anchors, fit.anchors, fit.bandwidth);
  const Vector w = normalized_weights(weights);
  Vector r = targets - k * fit.dual_beta;
  r.array() -= fit.intercept;
  return w.dot(r.cwiseAbs2()) / static_cast<double>(targets.size()) +
         lambda * fit.dual_beta.dot(k * fit.dual_beta);
}

KrrSelection fit_weighted_krr_cv(const Matrix& inputs, const Vector& targets,
                                 const Vector& weights, std::uint64_t seed, double bandwidth,
                                 int folds) {
  const Eigen::Index n = inputs.rows();
  if (folds < 2 || n < 2 * folds) {
    throw DomainError("kernel ridge cross-validation needs at least two rows per fold");
  }
  KrrSelection sel;
  const double bw = bandwidth > 0.0 ? bandwidth : median_heuristic_bandwidth(inputs);
  constexpr int kGrid = 13;
  sel.lambdas.resize(kGrid);
  for (int k = 0; k < kGrid; ++k) {
    sel.lambdas[k] = std::pow(10.0, 1.0 - 0.5 * k);  // 10 .. 1e-5
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());

  sel.cv_error = Vector::Zero(kGrid);
  double total_weight = 0.0;
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
    for (std::size_t k = 0; k < order.size(); ++k) {
      (static_cast<int>(k % static_cast<std::size_t>(folds)) == f ? test : train)
          .push_back(order[k]);
    }
    auto gather = [&](const std::vector<Eigen::Index>& idx, Matrix& x, Vector& t, Vector& w) {
      const auto m = static_cast<Eigen::Index>(idx.size());
      x.resize(m, inputs.cols());
      t.resize(m);
      w.resize(m);
      for (Eigen::Index r = 0; r < m; ++r) {
        const auto src = idx[static_cast<std::size_t>(r)];
        x.row(r) = inputs.row(src);
        t[r] = targets[src];
        w[r] = weights[src];
      }
    };
    Matrix xtr, xte;
    Vector ttr, tte, wtr, wte;
    gather(train, xtr, ttr, wtr);
    gather(test, xte, tte, wte);
    for (int k = 0; k < kGrid; ++k) {
      const KernelFit fit = fit_weighted_krr(xtr, ttr, wtr, sel.lambdas[k], bw);
      const Vector e = tte - fit.predict(xte);
      sel.cv_error[k] += wte.dot(e.cwiseAbs2());
    }
    total_weight += wte.sum();
  }
  sel.cv_error /= total_weight;
  sel.cv_error.minCoeff(&sel.best);
  sel.fit = fit_weighted_krr(inputs, targets, weights, sel.lambdas[sel.best], bw);
  return sel;
}

}  // namespace ivdl::learn
