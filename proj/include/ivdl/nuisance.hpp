#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "ivdl/common.hpp"
#include "ivdl/dgp.hpp"
#include "ivdl/forest.hpp"
#include "ivdl/linear.hpp"

namespace ivdl::nuisance {

using PointFunction = std::function<double(const Vector&)>;

// A fitted function together with its values at the training rows. For
// forest learners the training values are out-of-bag predictions.
struct FittedFunction {
  FittedFunction() = default;
  FittedFunction(PointFunction point, Vector values,
                 std::function<Vector(const Matrix&)> batch = {})
      : at(std::move(point)), training(std::move(values)), many(std::move(batch)) {}

  PointFunction at;
  Vector training;
  // Optional batch evaluation; falls back to row-wise `at`.
  std::function<Vector(const Matrix&)> many;

  Vector evaluate(const Matrix& inputs) const;
};

enum class PropensityMode { KnownConstantHalf, Logistic, Forest, ExternalOracle };
enum class ProbabilityLearner { Forest, Logistic };
enum class MeanLearner { Forest, Ols };

std::string to_string(PropensityMode mode);
std::string to_string(ProbabilityLearner learner);
std::string to_string(MeanLearner learner);

class PropensityModel {
 public:
  PropensityModel(PropensityMode mode, FittedFunction raw_positive, double clip);

  PropensityMode mode() const { return mode_; }
  double clip() const { return clip_; }

  // pi_Z(z, x), clipped to [clip, 1 - clip]; pi(+1, x) + pi(-1, x) = 1.
  double prob(int z, const Vector& x) const;
  double training_prob(int z, Eigen::Index row) const;
  Eigen::Index training_size() const { return raw_.training.size(); }

  const std::optional<learn::LogisticFit>& logistic() const { return logistic_; }
  void set_logistic(learn::LogisticFit fit) { logistic_ = std::move(fit); }

 private:
  double clipped(double p) const;

  PropensityMode mode_;
  FittedFunction raw_;
  double clip_;
  std::optional<learn::LogisticFit> logistic_;
};

// T-learner for the instrument's effect on treatment. Probabilities are
// clipped to [prob_clip, 1 - prob_clip]; the reported delta is floored to
// |delta| >= floor with its sign kept (sign(0) = +).
class DeltaModel {
 public:
  DeltaModel(FittedFunction p_pos, FittedFunction p_neg, double floor, double prob_clip);

  double p_pos(const Vector& x) const;
  double p_neg(const Vector& x) const;
  double raw(const Vector& x) const;
  double floored(const Vector& x) const;
  Vector floored(const Matrix& inputs) const;

  double training_p_pos(Eigen::Index row) const;
  double training_p_neg(Eigen::Index row) const;
  double training_raw(Eigen::Index row) const;
  double training_floored(Eigen::Index row) const;

  double floor() const { return floor_; }
  double prob_clip() const { return clip_; }

 private:
  double clip_prob(double p) const;
  double apply_floor(double d) const;

  FittedFunction p_pos_;
  FittedFunction p_neg_;
  double floor_;
  double clip_;
};

double floor_delta(double delta, double floor);

// E[Y | Z = +-1, X] and E[A | Z = +-1, X] (A on the +1/-1 scale).
struct ConditionalMeans {
  FittedFunction mu_y_pos;
  FittedFunction mu_y_neg;
  FittedFunction mu_a_pos;
  FittedFunction mu_a_neg;
};

enum class HVariant { H1, H2, H3 };
std::string to_string(HVariant v);

using HFunction = std::function<double(const Vector&, int, int)>;

struct NuisanceOptions {
  PropensityMode propensity = PropensityMode::Forest;
  ProbabilityLearner delta_learner = ProbabilityLearner::Forest;
  MeanLearner mean_learner = MeanLearner::Forest;
  double eps_pi = 0.01;
  double eps_delta = 0.05;
  learn::ForestParams forest;
  // Use out-of-bag forest predictions at the training rows.
  bool out_of_bag = true;
  // 0 or 1 disables cross-fitting.
  int cross_fit_folds = 0;
  std::uint64_t seed = 1;
};

class NuisanceSet {
 public:
  NuisanceSet(PropensityModel propensity, DeltaModel delta, ConditionalMeans means);

  const PropensityModel& propensity() const { return propensity_; }
  const DeltaModel& delta() const { return delta_; }
  const ConditionalMeans& means() const { return means_; }

  double g_star(const Vector& x) const;
  double m_y(const Vector& x) const;
  double m_a(const Vector& x) const;
  double prelim_cate(const Vector& x) const;
  Vector prelim_cate(const Matrix& inputs) const;

  Eigen::Index training_size() const { return propensity_.training_size(); }
  double training_g_star(Eigen::Index row) const;
  double training_m_a(Eigen::Index row) const;
  double training_prelim_cate(Eigen::Index row) const;

  // Replaces the plug-in Wald preliminary CATE (e.g. with a fitted model).
  void set_prelim_cate(FittedFunction prelim) { prelim_ = std::move(prelim); }
  void set_propensity(PropensityModel p) { propensity_ = std::move(p); }
  void set_means(ConditionalMeans m) { means_ = std::move(m); }

  // Stable hash of every training-row prediction; equal fingerprints mean
  // estimators saw bit-identical nuisances.
  std::uint64_t fingerprint() const;

 private:
  PropensityModel propensity_;
  DeltaModel delta_;
  ConditionalMeans means_;
  std::optional<FittedFunction> prelim_;
};

// Throws DegenerateInstrumentError when Z takes one value and the mode fits.
PropensityModel estimate_pi_z(const ObservedDataset& data, PropensityMode mode,
                              const NuisanceOptions& options = {});

// Fits P[A = +1 | X] within each instrument stratum.
DeltaModel estimate_delta(const ObservedDataset& data, ProbabilityLearner learner,
                          const NuisanceOptions& options = {});

// Y-means regressed per stratum; A-means derived as 2p - 1 from `delta`'s
// probability fits.
ConditionalMeans estimate_conditional_means(const ObservedDataset& data, MeanLearner learner,
                                            const DeltaModel& delta,
                                            const NuisanceOptions& options = {});

NuisanceSet fit_nuisances(const ObservedDataset& data, const NuisanceOptions& options = {});

// Exact nuisances from the data-generating process (quadrature for the
// treatment law), evaluated at `data`'s rows.
NuisanceSet oracle_nuisances(const dgp::TrueModel& truth, const ObservedDataset& data,
                             double eps_pi = 0.01, double eps_delta = 0.05);

PointFunction compute_g_star(const ConditionalMeans& means);

// (mu_y_pos - mu_y_neg) / floored delta.
PointFunction prelim_cate_wald(const ConditionalMeans& means, const DeltaModel& delta);

HFunction compute_h_star(HVariant variant, const ConditionalMeans& means, const DeltaModel& delta,
                         const PointFunction& prelim_cate);

// Value of an h*-variant from already evaluated nuisance components.
double h_star_value(HVariant variant, double mu_y_pos, double mu_y_neg, double mu_a_pos,
                    double mu_a_neg, double delta, double prelim_cate, int a, int z);

// Joint law of (Z, A) given X = x.
using ConditionalLaw = std::function<double(int z, int a)>;
using PropensityFunction = std::function<double(int z, const Vector& x)>;

// sum_{z,a} z h(x,a,z) / pi_Z(z,x) * P(z, a | x)
double check_eq5_constraint(const HFunction& h, const Vector& x, const ConditionalLaw& law,
                            const PropensityFunction& pi_z);

// Diagnostic CSV: x..., pi_z, delta_raw, delta_floored, mu_y_pos, mu_y_neg,
// g_star, prelim_cate at the training rows.
void write_nuisance_csv(const std::string& path, const ObservedDataset& data,
                        const NuisanceSet& set);

}  // namespace ivdl::nuisance
