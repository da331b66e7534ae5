#include "ivdl/estimator.hpp"

#include <algorithm>
#include <cstdio>
#include <type_traits>
#include <variant>
#include <numeric>
#include <vector>

#include "ivdl/rng.hpp"

namespace ivdl::cate {

std::string to_string(Method m) {
  switch (m) {
    case Method::IVDL:
      return "IV-DL";
    case Method::IVRDL1:
      return "IV-RDL1";
    case Method::IVRDL2:
      return "IV-RDL2";
  }
  return "?";
}

std::string to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::Linear:
      return "linear";
    case LearnerKind::Lasso:
      return "lasso";
    case LearnerKind::KRR:
      return "krr";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "ivdl") return Method::IVDL;
  if (s == "ivrdl1") return Method::IVRDL1;
  if (s == "ivrdl2") return Method::IVRDL2;
  throw DomainError("unknown method '" + s + "' (expected ivdl, ivrdl1 or ivrdl2)");
}

LearnerKind learner_from_string(const std::string& s) {
  if (s == "linear") return LearnerKind::Linear;
  if (s == "lasso") return LearnerKind::Lasso;
  if (s == "krr") return LearnerKind::KRR;
  throw DomainError("unknown learner '" + s + "' (expected linear, lasso or krr)");
}

std::string EstimatorSpec::name() const {
  std::string out = to_string(method);
  if (method == Method::IVRDL2) {
    out += "(" + nuisance::to_string(variant) + ")";
  }
  return out;
}

CateModel::CateModel(std::string name, FitVariant fit, std::uint64_t nuisance_fingerprint,
                     Eigen::Index dim)
    : name_(std::move(name)), fit_(std::move(fit)), fingerprint_(nuisance_fingerprint), dim_(dim) {}

double CateModel::predict(const Vector& x) const {
  if (x.size() != dim_) {
    throw DimensionError("CATE model expects " + std::to_string(dim_) + " covariates, got " +
                         std::to_string(x.size()));
  }
  return std::visit(
      [&x](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PluginFit>) {
          return f.function(x);
        } else {
          return f.predict(x);
        }
      },
      fit_);
}

Vector CateModel::predict(const Matrix& inputs) const {
  if (inputs.cols() != dim_) {
    throw DimensionError("CATE model expects " + std::to_string(dim_) + " covariates, got " +
                         std::to_string(inputs.cols()));
  }
  return std::visit(
      [&inputs](const auto& f) -> Vector {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PluginFit>) {
          if (f.batch) {
            return f.batch(inputs);
          }
          Vector out(inputs.rows());
          for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
            out[i] = f.function(inputs.row(i).transpose());
          }
          return out;
        } else {
          return f.predict(inputs);
        }
      },
      fit_);
}

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json CateModel::to_json() const {
  nlohmann::json j;
  j["estimator"] = name_;
  j["dim"] = dim_;
  char fp[17];
  std::snprintf(fp, sizeof fp, "%016llx", static_cast<unsigned long long>(fingerprint_));
  j["nuisance_fingerprint"] = fp;
  if (const auto* lin = std::get_if<learn::LinearFit>(&fit_)) {
    j["kind"] = "linear";
    j["beta"] = to_std(lin->beta);
  } else if (const auto* krr = std::get_if<learn::KernelFit>(&fit_)) {
    j["kind"] = "krr";
    j["bandwidth"] = krr->bandwidth;
    j["intercept"] = krr->intercept;
    j["dual_beta"] = to_std(krr->dual_beta);
    nlohmann::json anchors = nlohmann::json::array();
    for (Eigen::Index i = 0; i < krr->anchors.rows(); ++i) {
      anchors.push_back(to_std(krr->anchors.row(i).transpose()));
    }
    j["anchors"] = std::move(anchors);
  } else {
    throw Error("plug-in CATE models cannot be serialized");
  }
  return j;
}

CateModel CateModel::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const auto dim = j.at("dim").get<Eigen::Index>();
  const std::uint64_t fp = std::stoull(j.at("nuisance_fingerprint").get<std::string>(), nullptr, 16);
  const std::string name = j.at("estimator").get<std::string>();
  if (kind == "linear") {
    learn::LinearFit fit{to_eigen(j.at("beta").get<std::vector<double>>())};
    return CateModel(name, fit, fp, dim);
  }
  if (kind == "krr") {
    learn::KernelFit fit;
    fit.bandwidth = j.at("bandwidth").get<double>();
    fit.intercept = j.at("intercept").get<double>();
    fit.dual_beta = to_eigen(j.at("dual_beta").get<std::vector<double>>());
    const auto& rows = j.at("anchors");
    fit.anchors.resize(static_cast<Eigen::Index>(rows.size()), dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      fit.anchors.row(static_cast<Eigen::Index>(i)) =
          to_eigen(rows[i].get<std::vector<double>>()).transpose();
    }
    return CateModel(name, fit, fp, dim);
  }
  throw Error("unknown CATE model kind '" + kind + "'");
}

double modified_outcome(double y, int z, double delta_hat, double residual) {
  return 2.0 * (y - residual) * z / delta_hat;
}

Vector training_residuals(const ObservedDataset& data, const nuisance::NuisanceSet& nuisances,
                          const EstimatorSpec& spec) {
  const Eigen::Index n = data.size();
  Vector residual = Vector::Zero(n);
  if (spec.method == Method::IVRDL1) {
    for (Eigen::Index i = 0; i < n; ++i) {
      residual[i] = nuisances.training_g_star(i);
    }
  } else if (spec.method == Method::IVRDL2) {
    const auto& m = nuisances.means();
    for (Eigen::Index i = 0; i < n; ++i) {
      residual[i] = nuisance::h_star_value(
          spec.variant, m.mu_y_pos.training[i], m.mu_y_neg.training[i], m.mu_a_pos.training[i],
          m.mu_a_neg.training[i], nuisances.delta().training_floored(i),
          nuisances.training_prelim_cate(i), data.a[i], data.z[i]);
    }
  }
  return residual;
}

learn::WeightedRegressionProblem build_problem(const ObservedDataset& data,
                                               const nuisance::NuisanceSet& nuisances,
                                               const EstimatorSpec& spec) {
  data.validate();
  const Eigen::Index n = data.size();
  if (nuisances.training_size() != n) {
    throw DimensionError("nuisances were fitted on " + std::to_string(nuisances.training_size()) +
                         " rows but the dataset has " + std::to_string(n));
  }
  const Vector residual = training_residuals(data, nuisances, spec);
  Vector targets(n);
  Vector weights(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    targets[i] = modified_outcome(data.y[i], data.z[i], nuisances.delta().training_floored(i),
                                  residual[i]);
    weights[i] = 1.0 / nuisances.propensity().training_prob(data.z[i], i);
  }
  return learn::WeightedRegressionProblem::from_inputs(data.x, targets, weights);
}

CateModel fit_cate_problem(const learn::WeightedRegressionProblem& problem,
                           const EstimatorSpec& spec, std::uint64_t fingerprint) {
  problem.validate();
  const Eigen::Index dim = problem.design.cols() - 1;
  const LearnerSpec& ls = spec.learner;
  switch (ls.kind) {
    case LearnerKind::Linear:
      return CateModel(spec.name(), learn::solve_wls(problem), fingerprint, dim);
    case LearnerKind::Lasso: {
      learn::LinearFit fit = ls.lambda
                                 ? learn::fit_weighted_lasso(problem, *ls.lambda)
                                 : learn::fit_weighted_lasso_cv(problem, spec.seed).fit;
      return CateModel(spec.name(), std::move(fit), fingerprint, dim);
    }
    case LearnerKind::KRR: {
      Matrix inputs = problem.design.rightCols(dim);
      Vector targets = problem.targets;
      Vector weights = problem.weights;
      const Eigen::Index n = problem.size();
      if (ls.max_anchors > 0 && n > ls.max_anchors) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        Rng rng(derive_seed({spec.seed, 0x4b5252ULL}));
        std::shuffle(idx.begin(), idx.end(), rng.engine());
        idx.resize(static_cast<std::size_t>(ls.max_anchors));
        std::sort(idx.begin(), idx.end());
        Matrix xs(ls.max_anchors, dim);
        Vector ts(ls.max_anchors), ws(ls.max_anchors);
        for (Eigen::Index k = 0; k < ls.max_anchors; ++k) {
          const auto r = idx[static_cast<std::size_t>(k)];
          xs.row(k) = inputs.row(r);
          ts[k] = targets[r];
          ws[k] = weights[r];
        }
        inputs = std::move(xs);
        targets = std::move(ts);
        weights = std::move(ws);
      }
      const double bw = ls.bandwidth.value_or(0.0);
      learn::KernelFit fit =
          ls.lambda ? learn::fit_weighted_krr(inputs, targets, weights, *ls.lambda, bw)
                    : learn::fit_weighted_krr_cv(inputs, targets, weights, spec.seed, bw).fit;
      return CateModel(spec.name(), std::move(fit), fingerprint, dim);
    }
  }
  throw Error("unreachable learner kind");
}

CateModel fit_cate(const ObservedDataset& data, const nuisance::NuisanceSet& nuisances,
                   const EstimatorSpec& spec) {
  return fit_cate_problem(build_problem(data, nuisances, spec), spec, nuisances.fingerprint());
}

CateModel plugin_wald_model(const nuisance::NuisanceSet& nuisances, Eigen::Index dim) {
  auto shared = std::make_shared<const nuisance::NuisanceSet>(nuisances);
  PluginFit fit{[shared](const Vector& x) { return shared->prelim_cate(x); },
                [shared](const Matrix& x) { return shared->prelim_cate(x); }};
  return CateModel("Wald", std::move(fit), nuisances.fingerprint(), dim);
}

Regime extract_itr(const CateModel& model) {
  return [model](const Vector& x) { return model.regime(x); };
}

}  // namespace ivdl::cate
