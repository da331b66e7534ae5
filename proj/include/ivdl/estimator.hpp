#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "ivdl/common.hpp"
#include "ivdl/kernel.hpp"
#include "ivdl/linear.hpp"
#include "ivdl/nuisance.hpp"

namespace ivdl::cate {

enum class Method { IVDL, IVRDL1, IVRDL2 };
enum class LearnerKind { Linear, Lasso, KRR };

struct LearnerSpec {
  LearnerKind kind = LearnerKind::Linear;
  // Lasso / KRR penalty; empty = choose by 5-fold weighted cross-validation.
  std::optional<double> lambda;
  // KRR bandwidth; empty = median heuristic.
  std::optional<double> bandwidth;
  // KRR fits on a uniform subsample when n exceeds this.
  Eigen::Index max_anchors = 4000;
};

struct EstimatorSpec {
  Method method = Method::IVRDL1;
  nuisance::HVariant variant = nuisance::HVariant::H3;  // IV-RDL2 only
  LearnerSpec learner;
  std::uint64_t seed = 1;  // cross-validation folds and anchor subsampling

  std::string name() const;  // e.g. "IV-RDL2(h3)"
};

std::string to_string(Method m);
std::string to_string(LearnerKind k);
Method method_from_string(const std::string& s);
LearnerKind learner_from_string(const std::string& s);

// Plug-in predictor evaluated through the nuisance functions (the Wald
// baseline); not serializable.
struct PluginFit {
  std::function<double(const Vector&)> function;
  std::function<Vector(const Matrix&)> batch;
};

using FitVariant = std::variant<learn::LinearFit, learn::KernelFit, PluginFit>;

class CateModel {
 public:
  CateModel(std::string name, FitVariant fit, std::uint64_t nuisance_fingerprint,
            Eigen::Index dim);

  const std::string& name() const { return name_; }
  const FitVariant& fit() const { return fit_; }
  std::uint64_t nuisance_fingerprint() const { return fingerprint_; }
  Eigen::Index dim() const { return dim_; }

  double predict(const Vector& x) const;
  Vector predict(const Matrix& inputs) const;

  // Treatment regime sign(predict(x)) with sign(0) = +1.
  int regime(const Vector& x) const { return sign_of(predict(x)); }

  // Linear/LASSO: coefficients; KRR: anchors, dual coefficients, bandwidth
  // and intercept. Throws Error for plug-in models.
  nlohmann::json to_json() const;
  static CateModel from_json(const nlohmann::json& j);

 private:
  std::string name_;
  FitVariant fit_;
  std::uint64_t fingerprint_;
  Eigen::Index dim_;
};

// 2 (y - residual) z / delta
double modified_outcome(double y, int z, double delta_hat, double residual);

// Residual subtracted from each training outcome for `spec.method`.
Vector training_residuals(const ObservedDataset& data, const nuisance::NuisanceSet& nuisances,
                          const EstimatorSpec& spec);

// Weighted regression of modified outcomes with weights 1 / pi_Z(z_i, x_i).
learn::WeightedRegressionProblem build_problem(const ObservedDataset& data,
                                               const nuisance::NuisanceSet& nuisances,
                                               const EstimatorSpec& spec);

CateModel fit_cate(const ObservedDataset& data, const nuisance::NuisanceSet& nuisances,
                   const EstimatorSpec& spec);

// Same estimator, explicit weights (used to check weight-scale invariance).
CateModel fit_cate_problem(const learn::WeightedRegressionProblem& problem,
                           const EstimatorSpec& spec, std::uint64_t fingerprint);

CateModel plugin_wald_model(const nuisance::NuisanceSet& nuisances, Eigen::Index dim);

using Regime = std::function<int(const Vector&)>;
Regime extract_itr(const CateModel& model);

}  // namespace ivdl::cate
