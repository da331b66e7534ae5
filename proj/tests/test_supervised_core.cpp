#include <gtest/gtest.h>

#include <cmath>

#include "ivdl/dgp.hpp"
#include "ivdl/forest.hpp"
#include "ivdl/kernel.hpp"
#include "ivdl/linear.hpp"
#include "ivdl/rng.hpp"
#include "oracles.hpp"

using namespace ivdl;
using learn::WeightedRegressionProblem;

namespace {

struct RandomProblem {
  Matrix inputs;
  Vector targets;
  Vector weights;
};

RandomProblem random_problem(Eigen::Index n, Eigen::Index p, std::uint64_t seed,
                             bool unit_weights = false) {
  Rng rng(seed);
  RandomProblem out{Matrix(n, p), Vector(n), Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) out.inputs(i, j) = rng.normal() * (j + 1);
    out.targets[i] = 1.0 + out.inputs.row(i).sum() * 0.3 + rng.normal();
    out.weights[i] = unit_weights ? 1.0 : rng.uniform(0.2, 3.0);
  }
  return out;
}

double weighted_gradient_max(const WeightedRegressionProblem& pr, const Vector& beta) {
  const Vector r = pr.targets - pr.design * beta;
  return (pr.design.transpose() * (pr.weights.asDiagonal() * r)).lpNorm<Eigen::Infinity>();
}

}  // namespace

TEST(SolveWls, TwoPointInterpolation) {
  Matrix x(2, 1);
  x << 0, 1;
  Vector t(2);
  t << 1, 3;
  const auto fit = learn::solve_wls(WeightedRegressionProblem::from_inputs(x, t, Vector::Ones(2)));
  EXPECT_NEAR(fit.beta[0], 1.0, 1e-14);
  EXPECT_NEAR(fit.beta[1], 2.0, 1e-14);
}

TEST(SolveWls, ConstantResponse) {
  auto rp = random_problem(30, 3, 1);
  rp.targets.setConstant(2.5);
  const auto fit = learn::solve_wls(WeightedRegressionProblem::from_inputs(rp.inputs, rp.targets, rp.weights));
  EXPECT_NEAR(fit.beta[0], 2.5, 1e-12);
  EXPECT_LT(fit.beta.tail(3).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(SolveWls, MatchesDenseNormalEquations) {
  const auto rp = random_problem(8, 2, 2);
  Vector w(8);
  for (int i = 0; i < 8; ++i) w[i] = i + 1;
  const auto pr = WeightedRegressionProblem::from_inputs(rp.inputs, rp.targets, w);
  const Vector ref = oracle::normal_equations(pr.design, pr.targets, pr.weights);
  EXPECT_LT((learn::solve_wls(pr).beta - ref).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(SolveWls, ResidualOrthogonality) {
  for (std::uint64_t seed = 3; seed < 13; ++seed) {
    const auto rp = random_problem(200, 4, seed);
    const auto pr = WeightedRegressionProblem::from_inputs(rp.inputs, rp.targets, rp.weights);
    const auto fit = learn::solve_wls(pr);
    const double scale = (pr.design.cwiseAbs().transpose() * (pr.weights.asDiagonal() * pr.targets.cwiseAbs())).maxCoeff();
    EXPECT_LT(weighted_gradient_max(pr, fit.beta), 1e-8 * scale);
  }
}

TEST(SolveWls, RidgeStationarity) {
  const auto rp = random_problem(50, 3, 4);
  const auto pr = WeightedRegressionProblem::from_inputs(rp.inputs, rp.targets, rp.weights);
  const double ridge = 0.3;
  const auto fit = learn::solve_wls(pr, ridge);
  const Vector r = pr.targets - pr.design * fit.beta;
  Vector g = pr.design.transpose() * (pr.weights.asDiagonal() * r);
  Vector pen = fit.beta * (50 * ridge);
  pen[0] = 0;
  EXPECT_LT((g - pen).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(SolveWls, RankDeficiencyIsReported) {
  Matrix x(5, 2);
  x << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10;
  const auto pr = WeightedRegressionProblem::from_inputs(x, Vector::LinSpaced(5, 0, 1), Vector::Ones(5));
  EXPECT_THROW(learn::solve_wls(pr), RankDeficiencyError);
  EXPECT_NO_THROW(learn::solve_wls(pr, 1e-3));
}

TEST(SolveWls, WeightScaleInvariance) {
  const auto rp = random_problem(40, 3, 5);
  const auto a = learn::solve_wls(WeightedRegressionProblem::from_inputs(rp.inputs, rp.targets, rp.weights));
  const auto b = learn::solve_wls(WeightedRegressionProblem::from_inputs(rp.inputs, rp.targets, rp.weights * 7.5));
  EXPECT_LT((a.beta - b.beta).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(SolveWls, ValidatesWeights) {
  const auto rp = random_problem(10, 2, 6);
  Vector w = rp.weights;
  w[3] = 0.0;
  EXPECT_THROW(learn::solve_wls(WeightedRegressionProblem::from_inputs(rp.inputs, rp.targets, w)), DomainError);
  w[3] = std::nan("");
  EXPECT_THROW(learn::solve_wls(WeightedRegressionProblem::from_inputs(rp.inputs, rp.targets, w)), DomainError);
}

TEST(Lasso, LambdaMaxZeroesSlopes) {
  const auto rp = random_problem(100, 4, 7);
  const auto pr = WeightedRegressionProblem::from_inputs(rp.inputs, rp.targets, rp.weights);
  const double lmax = learn::lasso_lambda_max(pr);
  const auto at = learn::fit_weighted_lasso(pr, lmax);
  EXPECT_EQ(at.beta.tail(4).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(at.beta[0], (rp.weights.array() * rp.targets.array()).sum() / rp.weights.sum(), 1e-12);
  const auto below = learn::fit_weighted_lasso(pr, 0.95 * lmax);
  EXPECT_GT(below.beta.tail(4).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Lasso, SmallLambdaMatchesWls) {
  const auto rp = random_problem(200, 4, 8);
  const auto pr = WeightedRegressionProblem::from_inputs(rp.inputs, rp.targets, rp.weights);
  const auto lasso = learn::fit_weighted_lasso(pr, 1e-9);
  EXPECT_LT((lasso.beta - learn::solve_wls(pr).beta).lpNorm<Eigen::Infinity>(), 1e-4);
}

TEST(Lasso, KktConditions) {
  const auto rp = random_problem(150, 5, 9);
  const auto pr = WeightedRegressionProblem::from_inputs(rp.inputs, rp.targets, rp.weights);
  const double lambda = 0.2 * learn::lasso_lambda_max(pr);
  learn::LassoOptions opts;
  opts.tolerance = 1e-12;
  const auto fit = learn::fit_weighted_lasso(pr, lambda, opts);
  // Subgradient of (1/n) sum w (t - x b)^2 + lambda |b|_1.
  const Vector r = pr.targets - pr.design * fit.beta;
  const Vector g = (2.0 / 150.0) * pr.design.transpose() * (pr.weights.asDiagonal() * r);
  EXPECT_NEAR(g[0], 0.0, 1e-9);
  int active = 0;
  for (int j = 1; j <= 5; ++j) {
    if (fit.beta[j] != 0.0) {
      ++active;
      EXPECT_NEAR(g[j], lambda * (fit.beta[j] > 0 ? 1 : -1), 1e-8);
    } else {
      EXPECT_LE(std::abs(g[j]), lambda + 1e-8);
    }
  }
  EXPECT_GT(active, 0);
  EXPECT_LT(active, 5);
}

TEST(Lasso, ObjectiveNonIncreasingAcrossSweeps) {
  const auto rp = random_problem(120, 5, 10);
  const auto pr = WeightedRegressionProblem::from_inputs(rp.inputs, rp.targets, rp.weights);
  std::vector<double> trace;
  learn::LassoOptions opts;
  opts.sweep_observer = [&](double v) { trace.push_back(v); };
  learn::fit_weighted_lasso(pr, 0.05 * learn::lasso_lambda_max(pr), opts);
  ASSERT_GE(trace.size(), 2u);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    EXPECT_LE(trace[i], trace[i - 1] + 1e-12 * std::abs(trace[i - 1]));
  }
}

TEST(Lasso, WeightScaleMatchesRescaledLambda) {
  const auto rp = random_problem(80, 3, 11);
  const auto pr = WeightedRegressionProblem::from_inputs(rp.inputs, rp.targets, rp.weights);
  const auto scaled = WeightedRegressionProblem::from_inputs(rp.inputs, rp.targets, rp.weights * 4.0);
  const double lambda = 0.1 * learn::lasso_lambda_max(pr);
  learn::LassoOptions opts;
  opts.tolerance = 1e-12;
  const auto a = learn::fit_weighted_lasso(pr, lambda, opts);
  const auto b = learn::fit_weighted_lasso(scaled, 4.0 * lambda, opts);
  EXPECT_LT((a.beta - b.beta).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(Lasso, ConvergenceErrorCarriesIterate) {
  const auto rp = random_problem(80, 3, 12);
  const auto pr = WeightedRegressionProblem::from_inputs(rp.inputs, rp.targets, rp.weights);
  learn::LassoOptions opts;
  opts.max_sweeps = 1;
  opts.tolerance = 1e-300;
  try {
    learn::fit_weighted_lasso(pr, 1e-3, opts);
    FAIL() << "expected a convergence error";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.last_iterate().size(), 4);
  }
}

TEST(Lasso, CrossValidationPicksFromGrid) {
  const auto rp = random_problem(200, 4, 13);
  const auto pr = WeightedRegressionProblem::from_inputs(rp.inputs, rp.targets, rp.weights);
  const auto path = learn::fit_weighted_lasso_cv(pr, 3);
  ASSERT_EQ(path.lambdas.size(), 50);
  EXPECT_NEAR(path.lambdas[0], learn::lasso_lambda_max(pr), 1e-12);
  EXPECT_NEAR(path.lambdas[0] / path.lambdas[49], 100.0, 1e-9);
  EXPECT_EQ(path.cv_error.minCoeff(), path.cv_error[path.best]);
  const auto again = learn::fit_weighted_lasso_cv(pr, 3);
  EXPECT_EQ(path.fit.beta, again.fit.beta);
}

namespace {

double krr_objective_oracle(const Matrix& k, const Vector& t, const Vector& w, double lambda,
                            const Vector& theta) {
  const Eigen::Index n = t.size();
  const Vector beta = theta.head(n);
  const Vector r = t - k * beta - Vector::Constant(n, theta[n]);
  return (w.array() * r.array().square()).sum() / n + lambda * beta.dot(k * beta);
}

Vector krr_gradient_oracle(const Matrix& k, const Vector& t, const Vector& w, double lambda,
                           const Vector& theta) {
  const Eigen::Index n = t.size();
  const Vector beta = theta.head(n);
  const Vector r = t - k * beta - Vector::Constant(n, theta[n]);
  Vector g(n + 1);
  g.head(n) = -2.0 / n * k * (w.asDiagonal() * r) + 2.0 * lambda * k * beta;
  g[n] = -2.0 / n * w.dot(r);
  return g;
}

}  // namespace

TEST(Krr, ConstantTargets) {
  const auto rp = random_problem(20, 2, 14);
  const auto fit = learn::fit_weighted_krr(rp.inputs, Vector::Constant(20, 1.7), rp.weights, 0.1, 1.0);
  EXPECT_NEAR(fit.intercept, 1.7, 1e-6);
  EXPECT_LT(fit.dual_beta.norm(), 1e-6);
}

TEST(Krr, NearInterpolation) {
  Matrix x(5, 2);
  x << 0, 0, 1, 0, 0, 1, 1, 1, 0.5, 0.3;
  Vector t(5);
  t << 1, -1, 2, 0.5, 3;
  const auto fit = learn::fit_weighted_krr(x, t, Vector::Ones(5), 1e-10, 0.5);
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(fit.predict(Vector(x.row(i).transpose())), t[i], 1e-4);
  }
}

TEST(Krr, MatchesGenericMinimizer) {
  for (std::uint64_t seed = 20; seed < 25; ++seed) {
    const auto rp = random_problem(10, 2, seed);
    const double lambda = 0.05;
    const double bw = 1.5;
    const auto fit = learn::fit_weighted_krr(rp.inputs, rp.targets, rp.weights, lambda, bw);
    Matrix k(10, 10);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j)
        k(i, j) = std::exp(-(rp.inputs.row(i) - rp.inputs.row(j)).squaredNorm() / (2 * bw * bw));
    const Vector w = rp.weights / rp.weights.mean();
    auto f = [&](const Vector& th) { return krr_objective_oracle(k, rp.targets, w, lambda, th); };
    auto g = [&](const Vector& th) { return krr_gradient_oracle(k, rp.targets, w, lambda, th); };
    const Vector theta = oracle::bfgs(f, g, Vector::Zero(11));
    Vector mine(11);
    mine << fit.dual_beta, fit.intercept;
    EXPECT_NEAR(f(mine), f(theta), 1e-8);
    EXPECT_NEAR(learn::krr_objective(fit, rp.targets, rp.weights, lambda), f(mine), 1e-10);
    EXPECT_LT(g(mine).lpNorm<Eigen::Infinity>(), 1e-6);
  }
}

TEST(Krr, DuplicatingWithHalfWeightsLeavesFitUnchanged) {
  const auto rp = random_problem(25, 3, 30);
  Matrix x2(50, 3);
  x2 << rp.inputs, rp.inputs;
  Vector t2(50), w2(50);
  t2 << rp.targets, rp.targets;
  w2 << rp.weights / 2, rp.weights / 2;
  const auto a = learn::fit_weighted_krr(rp.inputs, rp.targets, rp.weights, 0.01, 1.2);
  const auto b = learn::fit_weighted_krr(x2, t2, w2, 0.01, 1.2);
  const Matrix grid = random_problem(40, 3, 31).inputs;
  EXPECT_LT((a.predict(grid) - b.predict(grid)).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(Krr, WeightScaleInvariance) {
  const auto rp = random_problem(30, 2, 32);
  const auto a = learn::fit_weighted_krr(rp.inputs, rp.targets, rp.weights, 0.02, 0.0);
  const auto b = learn::fit_weighted_krr(rp.inputs, rp.targets, rp.weights * 9.0, 0.02, 0.0);
  EXPECT_LT((a.predict(rp.inputs) - b.predict(rp.inputs)).lpNorm<Eigen::Infinity>(), 1e-8);
  EXPECT_DOUBLE_EQ(a.bandwidth, learn::median_heuristic_bandwidth(rp.inputs));
}

TEST(Krr, MedianHeuristic) {
  Matrix x(3, 1);
  x << 0, 1, 3;
  EXPECT_DOUBLE_EQ(learn::median_heuristic_bandwidth(x), 2.0);
}

TEST(Logistic, NullModel) {
  Rng rng(40);
  const int n = 4000;
  Matrix x(n, 2);
  Eigen::VectorXi y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    y[i] = rng.bernoulli(0.5) ? 1 : -1;
  }
  const auto fit = learn::fit_logistic(x, y);
  const double frac = (y.array() == 1).cast<double>().mean();
  const double se = 2.0 / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(fit.linear.beta[0], std::log(frac / (1 - frac)), 2 * se);
  EXPECT_NEAR(fit.linear.beta[1], 0.0, 2 * se);
  EXPECT_NEAR(fit.linear.beta[2], 0.0, 2 * se);
}

TEST(Logistic, RecoversInstrumentModel) {
  const auto g = dgp::generate_dataset(dgp::SettingId::Setting3, 100000, 41);
  const auto fit = learn::fit_logistic(g.data.x.col(0), g.data.z);
  EXPECT_NEAR(fit.linear.beta[1], 2.0, 0.05);
  EXPECT_NEAR(fit.linear.beta[0], 0.0, 0.05);
}

TEST(Logistic, CalibratedAgainstMarginalTreatmentModel) {
  const auto g = dgp::generate_dataset(dgp::SettingId::Setting1, 100000, 42);
  Matrix inputs(g.data.size(), 2);
  inputs << g.data.x.col(0), g.data.z.cast<double>();
  const auto fit = learn::fit_logistic(inputs, g.data.a);
  const dgp::TrueModel truth(dgp::SettingId::Setting1);
  double worst = 0;
  for (int i = 0; i <= 20; ++i) {
    const double x1 = -1 + 0.1 * i;
    for (int z : {-1, 1}) {
      Vector x = Vector::Zero(5);
      x[0] = x1;
      Vector in(2);
      in << x1, z;
      worst = std::max(worst, std::abs(fit.probability(in) - truth.marginal_p_a(x, z)));
    }
  }
  EXPECT_LT(worst, 0.01);
}

TEST(Logistic, SeparationFallsBackToRidge) {
  Matrix x(6, 1);
  x << -3, -2, -1, 1, 2, 3;
  Eigen::VectorXi y(6);
  y << -1, -1, -1, 1, 1, 1;
  const auto fit = learn::fit_logistic(x, y);
  EXPECT_TRUE(fit.used_ridge_fallback);
  learn::LogisticOptions strict;
  strict.ridge_fallback = false;
  EXPECT_THROW(learn::fit_logistic(x, y, nullptr, strict), SeparationError);
  Eigen::VectorXi one_class = Eigen::VectorXi::Ones(6);
  EXPECT_THROW(learn::fit_logistic(x, one_class), SeparationError);
}

TEST(Logistic, WeightScaleInvariance) {
  Rng rng(43);
  Matrix x(300, 2);
  Eigen::VectorXi y(300);
  Vector w(300);
  for (int i = 0; i < 300; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    y[i] = rng.bernoulli(oracle::expit(x(i, 0) - 0.5 * x(i, 1))) ? 1 : -1;
    w[i] = rng.uniform(0.5, 2);
  }
  const Vector w3 = 3.0 * w;
  const auto a = learn::fit_logistic(x, y, &w);
  const auto b = learn::fit_logistic(x, y, &w3);
  EXPECT_LT((a.linear.beta - b.linear.beta).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(Forest, ConstantTargets) {
  const auto rp = random_problem(100, 3, 50);
  learn::ForestParams p;
  p.num_trees = 50;
  const auto f = learn::fit_forest(rp.inputs, Vector::Constant(100, 4.25), p);
  const Matrix grid = random_problem(30, 3, 51).inputs;
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    EXPECT_EQ(f.predict(Vector(grid.row(i).transpose())), 4.25);
  }
}

TEST(Forest, LearnsNoiselessLinearFunction) {
  Rng rng(52);
  Matrix x(4000, 5);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (int j = 0; j < 5; ++j) x(i, j) = rng.uniform(-1, 1);
  const Vector t = x.col(0);
  learn::ForestParams p;
  p.num_trees = 200;
  const auto f = learn::fit_forest(x, t, p);
  Matrix grid(441, 5);
  grid.setZero();
  for (int i = 0; i < 21; ++i)
    for (int j = 0; j < 21; ++j) {
      grid(i * 21 + j, 0) = -0.9 + 0.09 * i;
      grid(i * 21 + j, 1) = -0.9 + 0.09 * j;
    }
  EXPECT_LT((f.predict(grid) - grid.col(0)).cwiseAbs().mean(), 0.05);
}

TEST(Forest, RowOrderInvariance) {
  const auto rp = random_problem(300, 4, 53);
  learn::ForestParams p;
  p.num_trees = 60;
  p.seed = 9;
  const auto a = learn::fit_forest(rp.inputs, rp.targets, p);
  std::vector<Eigen::Index> perm(300);
  for (Eigen::Index i = 0; i < 300; ++i) perm[static_cast<std::size_t>(i)] = (i * 7 + 3) % 300;
  Matrix xp(300, 4);
  Vector tp(300);
  for (Eigen::Index i = 0; i < 300; ++i) {
    xp.row(i) = rp.inputs.row(perm[static_cast<std::size_t>(i)]);
    tp[i] = rp.targets[perm[static_cast<std::size_t>(i)]];
  }
  const auto b = learn::fit_forest(xp, tp, p);
  const Matrix grid = random_problem(50, 4, 54).inputs;
  EXPECT_EQ(a.predict(grid), b.predict(grid));
  for (Eigen::Index i = 0; i < 300; ++i) {
    EXPECT_EQ(a.predict_oob(perm[static_cast<std::size_t>(i)]), b.predict_oob(i));
  }
}

TEST(Forest, WorkerCountDoesNotChangeResult) {
  const auto rp = random_problem(200, 3, 55);
  learn::ForestParams p;
  p.num_trees = 40;
  const auto a = learn::fit_forest(rp.inputs, rp.targets, p);
  p.workers = 3;
  const auto b = learn::fit_forest(rp.inputs, rp.targets, p);
  EXPECT_EQ(a.predict(rp.inputs), b.predict(rp.inputs));
  EXPECT_EQ(a.predict_oob(), b.predict_oob());
}

TEST(Forest, PredictionsWithinTargetRangeAndLeafSize) {
  const auto rp = random_problem(150, 3, 56);
  learn::ForestParams p;
  p.num_trees = 30;
  p.min_leaf = 7;
  const auto f = learn::fit_forest(rp.inputs, rp.targets, p);
  const Vector pred = f.predict(Matrix(random_problem(200, 3, 57).inputs * 3.0));
  EXPECT_GE(pred.minCoeff(), rp.targets.minCoeff());
  EXPECT_LE(pred.maxCoeff(), rp.targets.maxCoeff());
  for (const auto& tree : f.trees()) {
    for (int leaf : tree.leaves()) {
      EXPECT_GE(tree.nodes()[static_cast<std::size_t>(leaf)].count, 7);
    }
  }
}

TEST(Tree, ConstantTargetsGiveOneLeaf) {
  const auto rp = random_problem(60, 2, 60);
  const auto t = learn::fit_tree(rp.inputs, Vector::Constant(60, 1.0), learn::TreeParams{});
  EXPECT_EQ(t.leaf_count(), 1u);
}

TEST(Tree, StepFunctionRootSplitMatchesBruteForce) {
  Rng rng(61);
  Matrix x(1000, 3);
  Vector y(1000);
  for (int i = 0; i < 1000; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = rng.uniform(-1, 1);
    y[i] = x(i, 0) > 0.3 ? 1.0 : 0.0;
  }
  learn::TreeParams p;
  p.min_leaf = 50;
  const auto t = learn::fit_tree(x, y, p);
  const auto& root = t.nodes()[0];
  const auto ref = oracle::best_split(x, y, 50);
  EXPECT_EQ(root.feature, 0);
  EXPECT_EQ(root.feature, ref.feature);
  EXPECT_DOUBLE_EQ(root.threshold, ref.threshold);
  EXPECT_NEAR(root.threshold, 0.3, 0.05);
}

TEST(Tree, RootSplitMatchesBruteForceOnNoisyData) {
  for (std::uint64_t seed = 62; seed < 67; ++seed) {
    const auto rp = random_problem(120, 4, seed);
    learn::TreeParams p;
    p.min_leaf = 10;
    const auto t = learn::fit_tree(rp.inputs, rp.targets, p);
    const auto ref = oracle::best_split(rp.inputs, rp.targets, 10);
    EXPECT_EQ(t.nodes()[0].feature, ref.feature);
    EXPECT_DOUBLE_EQ(t.nodes()[0].threshold, ref.threshold);
  }
}

TEST(Tree, TiesGoToLowestFeature) {
  Matrix x(4, 2);
  x << 0, 0, 0, 0, 1, 1, 1, 1;
  Vector y(4);
  y << 0, 0, 1, 1;
  learn::TreeParams p;
  p.min_leaf = 1;
  const auto t = learn::fit_tree(x, y, p);
  EXPECT_EQ(t.nodes()[0].feature, 0);
}

TEST(Tree, LeafFractionsPartitionSample) {
  const auto rp = random_problem(500, 3, 68);
  learn::TreeParams p;
  p.min_leaf = 20;
  const auto t = learn::fit_tree(rp.inputs, rp.targets, p);
  double total = 0;
  int count = 0;
  for (int leaf : t.leaves()) {
    total += t.nodes()[static_cast<std::size_t>(leaf)].fraction;
    count += t.nodes()[static_cast<std::size_t>(leaf)].count;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(count, 500);
  EXPECT_GT(t.leaf_count(), 1u);
}

TEST(Tree, DepthCap) {
  const auto rp = random_problem(500, 3, 69);
  learn::TreeParams p;
  p.min_leaf = 1;
  p.max_depth = 2;
  const auto t = learn::fit_tree(rp.inputs, rp.targets, p);
  EXPECT_LE(t.leaf_count(), 4u);
  for (const auto& node : t.nodes()) EXPECT_LE(node.depth, 2);
}
