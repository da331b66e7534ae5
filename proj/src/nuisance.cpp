#include "ivdl/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <numeric>
#include <sstream>
#include <vector>

#include "ivdl/io.hpp"
#include "ivdl/rng.hpp"

namespace ivdl::nuisance {

std::string to_string(PropensityMode mode) {
  switch (mode) {
    case PropensityMode::KnownConstantHalf:
      return "half";
    case PropensityMode::Logistic:
      return "logistic";
    case PropensityMode::Forest:
      return "forest";
    case PropensityMode::ExternalOracle:
      return "oracle";
  }
  return "?";
}

std::string to_string(ProbabilityLearner learner) {
  return learner == ProbabilityLearner::Forest ? "forest" : "logistic";
}

std::string to_string(MeanLearner learner) {
  return learner == MeanLearner::Forest ? "forest" : "ols";
}

std::string to_string(HVariant v) {
  switch (v) {
    case HVariant::H1:
      return "h1";
    case HVariant::H2:
      return "h2";
    case HVariant::H3:
      return "h3";
  }
  return "?";
}

Vector FittedFunction::evaluate(const Matrix& inputs) const {
  if (many) {
    return many(inputs);
  }
  Vector out(inputs.rows());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    out[i] = at(inputs.row(i).transpose());
  }
  return out;
}

// ---------------------------------------------------------------------------

PropensityModel::PropensityModel(PropensityMode mode, FittedFunction raw_positive, double clip)
    : mode_(mode), raw_(std::move(raw_positive)), clip_(clip) {
  if (!(clip >= 0.0 && clip < 0.5)) {
    throw DomainError("propensity clip must lie in [0, 0.5)");
  }
}

double PropensityModel::clipped(double p) const { return std::clamp(p, clip_, 1.0 - clip_); }

double PropensityModel::prob(int z, const Vector& x) const {
  const double pos = clipped(raw_.at(x));
  return z == 1 ? pos : 1.0 - pos;
}

double PropensityModel::training_prob(int z, Eigen::Index row) const {
  const double pos = clipped(raw_.training[row]);
  return z == 1 ? pos : 1.0 - pos;
}

// ---------------------------------------------------------------------------

double floor_delta(double delta, double floor) {
  if (std::abs(delta) >= floor) {
    return delta;
  }
  return delta < 0.0 ? -floor : floor;
}

DeltaModel::DeltaModel(FittedFunction p_pos, FittedFunction p_neg, double floor, double prob_clip)
    : p_pos_(std::move(p_pos)), p_neg_(std::move(p_neg)), floor_(floor), clip_(prob_clip) {
  if (!(floor > 0.0 && floor <= 1.0)) {
    throw DomainError("delta floor must lie in (0, 1]");
  }
}

double DeltaModel::clip_prob(double p) const { return std::clamp(p, clip_, 1.0 - clip_); }
double DeltaModel::apply_floor(double d) const { return floor_delta(d, floor_); }

double DeltaModel::p_pos(const Vector& x) const { return clip_prob(p_pos_.at(x)); }
double DeltaModel::p_neg(const Vector& x) const { return clip_prob(p_neg_.at(x)); }
double DeltaModel::raw(const Vector& x) const { return p_pos(x) - p_neg(x); }
double DeltaModel::floored(const Vector& x) const { return apply_floor(raw(x)); }

Vector DeltaModel::floored(const Matrix& inputs) const {
  const Vector pos = p_pos_.evaluate(inputs);
  const Vector neg = p_neg_.evaluate(inputs);
  Vector out(inputs.rows());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    out[i] = apply_floor(clip_prob(pos[i]) - clip_prob(neg[i]));
  }
  return out;
}

double DeltaModel::training_p_pos(Eigen::Index row) const {
  return clip_prob(p_pos_.training[row]);
}
double DeltaModel::training_p_neg(Eigen::Index row) const {
  return clip_prob(p_neg_.training[row]);
}
double DeltaModel::training_raw(Eigen::Index row) const {
  return training_p_pos(row) - training_p_neg(row);
}
double DeltaModel::training_floored(Eigen::Index row) const {
  return apply_floor(training_raw(row));
}

// ---------------------------------------------------------------------------

NuisanceSet::NuisanceSet(PropensityModel propensity, DeltaModel delta, ConditionalMeans means)
    : propensity_(std::move(propensity)), delta_(std::move(delta)), means_(std::move(means)) {}

double NuisanceSet::g_star(const Vector& x) const {
  return 0.5 * (means_.mu_y_pos.at(x) + means_.mu_y_neg.at(x));
}

double NuisanceSet::m_y(const Vector& x) const { return g_star(x); }

double NuisanceSet::m_a(const Vector& x) const {
  return 0.5 * (means_.mu_a_pos.at(x) + means_.mu_a_neg.at(x));
}

double NuisanceSet::prelim_cate(const Vector& x) const {
  if (prelim_) {
    return prelim_->at(x);
  }
  return (means_.mu_y_pos.at(x) - means_.mu_y_neg.at(x)) / delta_.floored(x);
}

Vector NuisanceSet::prelim_cate(const Matrix& inputs) const {
  if (prelim_) {
    return prelim_->evaluate(inputs);
  }
  return ((means_.mu_y_pos.evaluate(inputs) - means_.mu_y_neg.evaluate(inputs)).array() /
          delta_.floored(inputs).array())
      .matrix();
}

double NuisanceSet::training_g_star(Eigen::Index row) const {
  return 0.5 * (means_.mu_y_pos.training[row] + means_.mu_y_neg.training[row]);
}

double NuisanceSet::training_m_a(Eigen::Index row) const {
  return 0.5 * (means_.mu_a_pos.training[row] + means_.mu_a_neg.training[row]);
}

double NuisanceSet::training_prelim_cate(Eigen::Index row) const {
  if (prelim_) {
    return prelim_->training[row];
  }
  return (means_.mu_y_pos.training[row] - means_.mu_y_neg.training[row]) /
         delta_.training_floored(row);
}

namespace {

class Fnv1a {
 public:
  void add(const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void add(double v) { add(&v, sizeof v); }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::uint64_t NuisanceSet::fingerprint() const {
  Fnv1a h;
  const Eigen::Index n = training_size();
  h.add(propensity_.clip());
  h.add(delta_.floor());
  h.add(delta_.prob_clip());
  for (Eigen::Index i = 0; i < n; ++i) {
    h.add(propensity_.training_prob(1, i));
    h.add(delta_.training_p_pos(i));
    h.add(delta_.training_p_neg(i));
    h.add(means_.mu_y_pos.training[i]);
    h.add(means_.mu_y_neg.training[i]);
    h.add(means_.mu_a_pos.training[i]);
    h.add(means_.mu_a_neg.training[i]);
    h.add(training_prelim_cate(i));
  }
  return h.value();
}

// ---------------------------------------------------------------------------

namespace {

enum class ComponentLearner { Forest, Logistic, Ols };

enum Stream : std::uint64_t {
  kStreamPropensity = 11,
  kStreamDeltaPos = 12,
  kStreamDeltaNeg = 13,
  kStreamMeanPos = 14,
  kStreamMeanNeg = 15,
  kStreamFolds = 16,
};

struct SingleFit {
  PointFunction at;
  std::function<Vector(const Matrix&)> many;
  // Prediction at row `r` of the full training matrix; `position` is the
  // row's index within the fitted subset or -1.
  std::function<double(Eigen::Index r, Eigen::Index position)> at_training;
};

SingleFit fit_once(const Matrix& x, const Vector& target, const std::vector<Eigen::Index>& rows,
                   ComponentLearner learner, const NuisanceOptions& options,
                   std::uint64_t seed) {
  const auto m = static_cast<Eigen::Index>(rows.size());
  Matrix xs(m, x.cols());
  Vector ts(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    xs.row(k) = x.row(rows[static_cast<std::size_t>(k)]);
    ts[k] = target[rows[static_cast<std::size_t>(k)]];
  }
  SingleFit out;
  switch (learner) {
    case ComponentLearner::Forest: {
      learn::ForestParams params = options.forest;
      params.seed = seed;
      // Tiny strata cannot honour the leaf size; shrink it rather than fail.
      params.min_leaf = std::max(1, std::min<int>(params.min_leaf, static_cast<int>(m / 2)));
      auto forest = std::make_shared<const learn::ForestFit>(learn::fit_forest(xs, ts, params));
      out.at = [forest](const Vector& v) { return forest->predict(v); };
      out.many = [forest](const Matrix& m) { return forest->predict(m); };
      const bool oob = options.out_of_bag;
      out.at_training = [forest, &x, oob](Eigen::Index r, Eigen::Index position) {
        if (oob && position >= 0) {
          return forest->predict_oob(position);
        }
        return forest->predict(Vector(x.row(r).transpose()));
      };
      break;
    }
    case ComponentLearner::Logistic: {
      Eigen::VectorXi labels(m);
      for (Eigen::Index k = 0; k < m; ++k) {
        labels[k] = ts[k] > 0.5 ? 1 : -1;
      }
      auto fit = std::make_shared<const learn::LogisticFit>(learn::fit_logistic(xs, labels));
      out.at = [fit](const Vector& v) { return fit->probability(v); };
      out.at_training = [fit, &x](Eigen::Index r, Eigen::Index) {
        return fit->probability(Vector(x.row(r).transpose()));
      };
      break;
    }
    case ComponentLearner::Ols: {
      auto fit = std::make_shared<const learn::LinearFit>(learn::solve_wls(
          learn::WeightedRegressionProblem::from_inputs(xs, ts, Vector::Ones(m))));
      out.at = [fit](const Vector& v) { return fit->predict(v); };
      out.many = [fit](const Matrix& m) { return fit->predict(m); };
      out.at_training = [fit, &x](Eigen::Index r, Eigen::Index) {
        return fit->predict(Vector(x.row(r).transpose()));
      };
      break;
    }
  }
  return out;
}

// Fits `target` on `rows` and evaluates at every training row, honouring the
// out-of-bag and cross-fitting options.
FittedFunction fit_component(const Matrix& x, const Vector& target,
                             const std::vector<Eigen::Index>& rows, ComponentLearner learner,
                             const NuisanceOptions& options, std::uint64_t stream) {
  const Eigen::Index n = x.rows();
  FittedFunction out;
  out.training.resize(n);
  const SingleFit full = fit_once(x, target, rows, learner, options,
                                  derive_seed({options.seed, stream}));
  out.at = full.at;
  out.many = full.many;

  if (options.cross_fit_folds <= 1) {
    std::vector<Eigen::Index> position(static_cast<std::size_t>(n), -1);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      position[static_cast<std::size_t>(rows[k])] = static_cast<Eigen::Index>(k);
    }
    for (Eigen::Index r = 0; r < n; ++r) {
      out.training[r] = full.at_training(r, position[static_cast<std::size_t>(r)]);
    }
    return out;
  }

  const int folds = options.cross_fit_folds;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(derive_seed({options.seed, kStreamFolds}));
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < order.size(); ++k) {
    fold_of[static_cast<std::size_t>(order[k])] = static_cast<int>(k % static_cast<std::size_t>(folds));
  }
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train;
    for (auto r : rows) {
      if (fold_of[static_cast<std::size_t>(r)] != f) {
        train.push_back(r);
      }
    }
    if (train.empty()) {
      throw DegenerateInstrumentError("cross-fitting fold leaves a stratum empty");
    }
    const SingleFit part = fit_once(x, target, train, learner, options,
                                    derive_seed({options.seed, stream, static_cast<std::uint64_t>(f) + 1}));
    for (Eigen::Index r = 0; r < n; ++r) {
      if (fold_of[static_cast<std::size_t>(r)] == f) {
        out.training[r] = part.at_training(r, -1);
      }
    }
  }
  return out;
}

std::vector<Eigen::Index> stratum(const ObservedDataset& data, int z) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    if (data.z[i] == z) {
      rows.push_back(i);
    }
  }
  return rows;
}

void require_both_strata(const std::vector<Eigen::Index>& pos,
                         const std::vector<Eigen::Index>& neg) {
  if (pos.empty() || neg.empty()) {
    throw DegenerateInstrumentError(
        "degenerate instrument: every record has the same instrument value");
  }
}

Vector indicator(const Eigen::VectorXi& coded) {
  Vector out(coded.size());
  for (Eigen::Index i = 0; i < coded.size(); ++i) {
    out[i] = coded[i] == 1 ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace

PropensityModel estimate_pi_z(const ObservedDataset& data, PropensityMode mode,
                              const NuisanceOptions& options) {
  data.validate();
  const Eigen::Index n = data.size();
  if (mode == PropensityMode::KnownConstantHalf) {
    FittedFunction half{[](const Vector&) { return 0.5; }, Vector::Constant(n, 0.5)};
    return PropensityModel(mode, std::move(half), options.eps_pi);
  }
  if (mode == PropensityMode::ExternalOracle) {
    throw DomainError("an oracle propensity is supplied, not estimated");
  }
  require_both_strata(stratum(data, 1), stratum(data, -1));
  std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  const Vector target = indicator(data.z);
  if (mode == PropensityMode::Logistic) {
    auto fit = learn::fit_logistic(data.x, data.z);
    FittedFunction f = fit_component(data.x, target, all, ComponentLearner::Logistic, options,
                                     kStreamPropensity);
    PropensityModel model(mode, std::move(f), options.eps_pi);
    model.set_logistic(std::move(fit));
    return model;
  }
  FittedFunction f =
      fit_component(data.x, target, all, ComponentLearner::Forest, options, kStreamPropensity);
  return PropensityModel(mode, std::move(f), options.eps_pi);
}

DeltaModel estimate_delta(const ObservedDataset& data, ProbabilityLearner learner,
                          const NuisanceOptions& options) {
  data.validate();
  const auto pos = stratum(data, 1);
  const auto neg = stratum(data, -1);
  require_both_strata(pos, neg);
  const Vector target = indicator(data.a);
  const auto kind =
      learner == ProbabilityLearner::Forest ? ComponentLearner::Forest : ComponentLearner::Logistic;
  if (kind == ComponentLearner::Logistic) {
    for (const auto* rows : {&pos, &neg}) {
      bool has_pos = false;
      bool has_neg = false;
      for (auto r : *rows) {
        (data.a[r] == 1 ? has_pos : has_neg) = true;
      }
      if (!has_pos || !has_neg) {
        throw SeparationError(
            "an instrument stratum contains a single treatment value; logistic fit is "
            "separated (use the forest learner)");
      }
    }
  }
  FittedFunction p_pos = fit_component(data.x, target, pos, kind, options, kStreamDeltaPos);
  FittedFunction p_neg = fit_component(data.x, target, neg, kind, options, kStreamDeltaNeg);
  return DeltaModel(std::move(p_pos), std::move(p_neg), options.eps_delta, options.eps_pi);
}

ConditionalMeans estimate_conditional_means(const ObservedDataset& data, MeanLearner learner,
                                            const DeltaModel& delta,
                                            const NuisanceOptions& options) {
  data.validate();
  const auto pos = stratum(data, 1);
  const auto neg = stratum(data, -1);
  if (pos.empty() || neg.empty()) {
    throw DegenerateInstrumentError("conditional means need both instrument strata non-empty");
  }
  const auto kind = learner == MeanLearner::Forest ? ComponentLearner::Forest : ComponentLearner::Ols;
  ConditionalMeans means;
  means.mu_y_pos = fit_component(data.x, data.y, pos, kind, options, kStreamMeanPos);
  means.mu_y_neg = fit_component(data.x, data.y, neg, kind, options, kStreamMeanNeg);

  const Eigen::Index n = data.size();
  auto derive_a = [&](bool positive) {
    FittedFunction f;
    f.at = [delta, positive](const Vector& x) {
      return 2.0 * (positive ? delta.p_pos(x) : delta.p_neg(x)) - 1.0;
    };
    f.training.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      f.training[i] = 2.0 * (positive ? delta.training_p_pos(i) : delta.training_p_neg(i)) - 1.0;
    }
    return f;
  };
  means.mu_a_pos = derive_a(true);
  means.mu_a_neg = derive_a(false);
  return means;
}

NuisanceSet fit_nuisances(const ObservedDataset& data, const NuisanceOptions& options) {
  PropensityModel propensity = estimate_pi_z(data, options.propensity, options);
  DeltaModel delta = estimate_delta(data, options.delta_learner, options);
  ConditionalMeans means = estimate_conditional_means(data, options.mean_learner, delta, options);
  return NuisanceSet(std::move(propensity), std::move(delta), std::move(means));
}

NuisanceSet oracle_nuisances(const dgp::TrueModel& truth, const ObservedDataset& data,
                             double eps_pi, double eps_delta) {
  data.validate();
  const Eigen::Index n = data.size();
  Vector pi(n), p_pos(n), p_neg(n), mu_y_pos(n), mu_y_neg(n);
  Vector x;
  for (Eigen::Index i = 0; i < n; ++i) {
    x = data.x.row(i).transpose();
    pi[i] = truth.pi_z_true(x);
    p_pos[i] = truth.marginal_p_a(x, 1);
    p_neg[i] = truth.marginal_p_a(x, -1);
    const double h = truth.h(x);
    const double coef = truth.treatment_coefficient(x);
    mu_y_pos[i] = h + coef * (2.0 * p_pos[i] - 1.0);
    mu_y_neg[i] = h + coef * (2.0 * p_neg[i] - 1.0);
  }
  PropensityModel propensity(
      PropensityMode::ExternalOracle,
      FittedFunction{[truth](const Vector& v) { return truth.pi_z_true(v); }, pi}, eps_pi);
  DeltaModel delta(
      FittedFunction{[truth](const Vector& v) { return truth.marginal_p_a(v, 1); }, p_pos},
      FittedFunction{[truth](const Vector& v) { return truth.marginal_p_a(v, -1); }, p_neg},
      eps_delta, 0.0);
  ConditionalMeans means;
  means.mu_y_pos = {[truth](const Vector& v) { return truth.mu_y(v, 1); }, mu_y_pos};
  means.mu_y_neg = {[truth](const Vector& v) { return truth.mu_y(v, -1); }, mu_y_neg};
  means.mu_a_pos = {[truth](const Vector& v) { return truth.mu_a(v, 1); },
                    (2.0 * p_pos.array() - 1.0).matrix()};
  means.mu_a_neg = {[truth](const Vector& v) { return truth.mu_a(v, -1); },
                    (2.0 * p_neg.array() - 1.0).matrix()};
  return NuisanceSet(std::move(propensity), std::move(delta), std::move(means));
}

PointFunction compute_g_star(const ConditionalMeans& means) {
  return [means](const Vector& x) { return 0.5 * (means.mu_y_pos.at(x) + means.mu_y_neg.at(x)); };
}

PointFunction prelim_cate_wald(const ConditionalMeans& means, const DeltaModel& delta) {
  return [means, delta](const Vector& x) {
    return (means.mu_y_pos.at(x) - means.mu_y_neg.at(x)) / delta.floored(x);
  };
}

double h_star_value(HVariant variant, double mu_y_pos, double mu_y_neg, double mu_a_pos,
                    double mu_a_neg, double delta, double prelim_cate, int a, int z) {
  double mu_y = 0.0;
  double mu_a = 0.0;
  switch (variant) {
    case HVariant::H1:
      mu_y = mu_y_pos;
      mu_a = mu_a_pos;
      break;
    case HVariant::H2:
      mu_y = mu_y_neg;
      mu_a = mu_a_neg;
      break;
    case HVariant::H3:
      mu_y = 0.5 * (mu_y_pos + mu_y_neg);
      mu_a = 0.5 * (mu_a_pos + mu_a_neg);
      break;
  }
  return mu_y + prelim_cate * (a - mu_a - z * delta) / 2.0;
}

HFunction compute_h_star(HVariant variant, const ConditionalMeans& means, const DeltaModel& delta,
                         const PointFunction& prelim_cate) {
  return [variant, means, delta, prelim_cate](const Vector& x, int a, int z) {
    return h_star_value(variant, means.mu_y_pos.at(x), means.mu_y_neg.at(x), means.mu_a_pos.at(x),
                        means.mu_a_neg.at(x), delta.floored(x), prelim_cate(x), a, z);
  };
}

double check_eq5_constraint(const HFunction& h, const Vector& x, const ConditionalLaw& law,
                            const PropensityFunction& pi_z) {
  double total = 0.0;
  for (int z : {1, -1}) {
    const double pz = pi_z(z, x);
    for (int a : {1, -1}) {
      total += z * h(x, a, z) / pz * law(z, a);
    }
  }
  return total;
}

void write_nuisance_csv(const std::string& path, const ObservedDataset& data,
                        const NuisanceSet& set) {
  std::ostringstream out;
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    out << 'x' << (j + 1) << ',';
  }
  out << "pi_z,delta_raw,delta_floored,mu_y_pos,mu_y_neg,g_star,prelim_cate\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.dim(); ++j) {
      out << io::format_double(data.x(i, j)) << ',';
    }
    out << io::format_double(set.propensity().training_prob(1, i)) << ','
        << io::format_double(set.delta().training_raw(i)) << ','
        << io::format_double(set.delta().training_floored(i)) << ','
        << io::format_double(set.means().mu_y_pos.training[i]) << ','
        << io::format_double(set.means().mu_y_neg.training[i]) << ','
        << io::format_double(set.training_g_star(i)) << ','
        << io::format_double(set.training_prelim_cate(i)) << '\n';
  }
  io::write_text(path, out.str());
}

}  // namespace ivdl::nuisance
