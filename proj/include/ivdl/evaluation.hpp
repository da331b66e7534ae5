#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ivdl/dgp.hpp"
#include "ivdl/estimator.hpp"
#include "ivdl/nuisance.hpp"

namespace ivdl::eval {

// Mean over test rows of (predict(x) - cate(x))^2.
double metric_mse(const cate::CateModel& model, const dgp::TrueModel& truth, const Matrix& test_x);

// Share of test rows where the estimated regime matches sign(cate(x)).
// Rows with |cate(x)| < 1e-12 are left out of the denominator.
double metric_ar(const cate::CateModel& model, const dgp::TrueModel& truth, const Matrix& test_x);

double metric_value(const cate::CateModel& model, const dgp::TrueModel& truth,
                    const Matrix& test_x);

struct Misspecification {
  bool wrong_propensity_half = false;
  bool ols_g_star = false;

  bool none() const { return !wrong_propensity_half && !ols_g_star; }
  std::string describe() const;
};

// WrongPropensityHalf swaps in the constant 1/2 propensity; OlsGStar refits
// the outcome means behind g* with per-stratum OLS. Only valid for settings
// whose instrument depends on X (3 and 4). Returns the input untouched when
// no flag is set.
nuisance::NuisanceSet inject_misspecification(const nuisance::NuisanceSet& nuisances,
                                              const Misspecification& flags,
                                              dgp::SettingId setting,
                                              const ObservedDataset& training,
                                              const nuisance::NuisanceOptions& options = {});

enum class SpreadKind { StandardError, StandardDeviation };

struct SimulationConfig {
  dgp::SettingId setting = dgp::SettingId::Setting1;
  Eigen::Index n_train = 500;
  Eigen::Index n_test = 5000;
  int replications = 100;
  std::uint64_t master_seed = 1;
  std::vector<cate::EstimatorSpec> estimators;
  bool include_wald = true;
  Misspecification misspecification;
  nuisance::NuisanceOptions nuisance;
  SpreadKind spread = SpreadKind::StandardError;
  bool redraw_test = true;
  int workers = 1;

  // Throws DomainError naming the offending field.
  void validate() const;
};

// The default estimator list: IV-DL, IV-RDL1 and IV-RDL2(h3) with a linear learner.
std::vector<cate::EstimatorSpec> default_estimators(cate::LearnerSpec learner = {});

struct ReplicationRecord {
  int replication = 0;
  std::string estimator;
  double mse = 0.0;
  double ar = 0.0;
  double value = 0.0;
  double max_value = 0.0;
  bool failed = false;
  std::string error;
  std::uint64_t nuisance_fingerprint = 0;
};

struct MetricSummary {
  double mean = 0.0;
  double se = 0.0;
  int count = 0;
};

struct EstimatorRow {
  std::string estimator;
  MetricSummary mse;
  MetricSummary ar;
  MetricSummary value;
  int failures = 0;
};

struct MetricsTable {
  dgp::SettingId setting = dgp::SettingId::Setting1;
  int replications = 0;
  Eigen::Index n_train = 0;
  Eigen::Index n_test = 0;
  SpreadKind spread = SpreadKind::StandardError;
  // False when fewer than two replications contributed; SE fields are 0.
  bool se_defined = true;
  std::vector<EstimatorRow> rows;
  MetricSummary max_value;
  std::vector<ReplicationRecord> records;
  std::vector<std::string> warnings;

  const EstimatorRow& row(const std::string& estimator) const;
};

// Recomputes the summary rows from `table.records`.
void aggregate(MetricsTable& table, const std::vector<std::string>& estimator_order);

MetricsTable run_replications(const SimulationConfig& config);

// Aligned text table, mean x 1e-2 with (SE x 1e-2).
std::string format_table(const MetricsTable& table);
// setting,estimator,metric,mean,se,failures
std::string summary_csv(const MetricsTable& table);
// setting,replication,estimator,metric,value
std::string replications_csv(const MetricsTable& table);

}  // namespace ivdl::eval
