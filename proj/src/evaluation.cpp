#include "ivdl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <cstdio>
#include <sstream>

#include "ivdl/io.hpp"
#include "ivdl/parallel.hpp"
#include "ivdl/rng.hpp"

namespace ivdl::eval {

namespace {

double mse_of(const Vector& pred, const Vector& cate) {
  return (pred - cate).squaredNorm() / static_cast<double>(pred.size());
}

double ar_of(const Vector& pred, const Vector& cate) {
  Eigen::Index agree = 0;
  Eigen::Index counted = 0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    if (std::abs(cate[i]) < 1e-12) {
      continue;
    }
    ++counted;
    agree += sign_of(pred[i]) == sign_of(cate[i]) ? 1 : 0;
  }
  return counted == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(counted);
}

double value_of(const Vector& pred, const Vector& cate, const Vector& h) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    sum += h[i] + 0.5 * cate[i] * sign_of(pred[i]);
  }
  return sum / static_cast<double>(pred.size());
}

}  // namespace

double metric_mse(const cate::CateModel& model, const dgp::TrueModel& truth, const Matrix& test_x) {
  const Vector pred = model.predict(test_x);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < test_x.rows(); ++i) {
    const double d = pred[i] - truth.cate(test_x.row(i).transpose());
    sum += d * d;
  }
  return sum / static_cast<double>(test_x.rows());
}

double metric_ar(const cate::CateModel& model, const dgp::TrueModel& truth, const Matrix& test_x) {
  const Vector pred = model.predict(test_x);
  Eigen::Index agree = 0;
  Eigen::Index counted = 0;
  for (Eigen::Index i = 0; i < test_x.rows(); ++i) {
    const double c = truth.cate(test_x.row(i).transpose());
    if (std::abs(c) < 1e-12) {
      continue;
    }
    ++counted;
    if (sign_of(pred[i]) == sign_of(c)) {
      ++agree;
    }
  }
  return counted == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(counted);
}

double metric_value(const cate::CateModel& model, const dgp::TrueModel& truth,
                    const Matrix& test_x) {
  const Vector pred = model.predict(test_x);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < test_x.rows(); ++i) {
    const Vector x = test_x.row(i).transpose();
    sum += truth.h(x) + 0.5 * truth.cate(x) * sign_of(pred[i]);
  }
  return sum / static_cast<double>(test_x.rows());
}

std::string Misspecification::describe() const {
  if (none()) {
    return "none";
  }
  std::string out;
  if (wrong_propensity_half) {
    out = "wrong_propensity_half";
  }
  if (ols_g_star) {
    out += out.empty() ? "ols_g_star" : "+ols_g_star";
  }
  return out;
}

namespace {

void require_instrument_model(dgp::SettingId setting) {
  if (setting != dgp::SettingId::Setting3 && setting != dgp::SettingId::Setting4) {
    throw DomainError("misspecification flags need an X-dependent instrument model (setting 3 or 4), got setting " +
                      dgp::to_string(setting));
  }
}

}  // namespace

nuisance::NuisanceSet inject_misspecification(const nuisance::NuisanceSet& nuisances,
                                              const Misspecification& flags,
                                              dgp::SettingId setting,
                                              const ObservedDataset& training,
                                              const nuisance::NuisanceOptions& options) {
  if (flags.none()) {
    return nuisances;
  }
  require_instrument_model(setting);
  nuisance::NuisanceSet out = nuisances;
  if (flags.wrong_propensity_half) {
    out.set_propensity(nuisance::estimate_pi_z(training, nuisance::PropensityMode::KnownConstantHalf,
                                               options));
  }
  if (flags.ols_g_star) {
    out.set_means(nuisance::estimate_conditional_means(training, nuisance::MeanLearner::Ols,
                                                       nuisances.delta(), options));
  }
  return out;
}

void SimulationConfig::validate() const {
  if (replications < 1) {
    throw DomainError("replications must be >= 1");
  }
  if (n_train < 2) {
    throw DomainError("n_train must be >= 2");
  }
  if (n_test < 1) {
    throw DomainError("n_test must be >= 1");
  }
  if (workers < 1) {
    throw DomainError("workers must be >= 1");
  }
  if (estimators.empty() && !include_wald) {
    throw DomainError("estimators must list at least one estimator");
  }
  if (!misspecification.none()) {
    require_instrument_model(setting);
  }
  if (!(nuisance.eps_pi >= 0.0 && nuisance.eps_pi < 0.5)) {
    throw DomainError("eps_pi must lie in [0, 0.5)");
  }
  if (!(nuisance.eps_delta > 0.0 && nuisance.eps_delta <= 1.0)) {
    throw DomainError("eps_delta must lie in (0, 1]");
  }
}

std::vector<cate::EstimatorSpec> default_estimators(cate::LearnerSpec learner) {
  std::vector<cate::EstimatorSpec> out;
  for (auto m : {cate::Method::IVDL, cate::Method::IVRDL1, cate::Method::IVRDL2}) {
    cate::EstimatorSpec s;
    s.method = m;
    s.learner = learner;
    out.push_back(s);
  }
  return out;
}

const EstimatorRow& MetricsTable::row(const std::string& estimator) const {
  for (const auto& r : rows) {
    if (r.estimator == estimator) {
      return r;
    }
  }
  throw DomainError("no estimator '" + estimator + "' in the metrics table");
}

namespace {

MetricSummary summarize(const std::vector<double>& values, SpreadKind spread) {
  MetricSummary s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) {
    s.mean = std::nan("");
    return s;
  }
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) {
    return s;
  }
  double ss = 0.0;
  for (double v : values) {
    ss += (v - s.mean) * (v - s.mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  s.se = spread == SpreadKind::StandardError ? sd / std::sqrt(static_cast<double>(values.size())) : sd;
  return s;
}

}  // namespace

void aggregate(MetricsTable& table, const std::vector<std::string>& estimator_order) {
  table.rows.clear();
  table.warnings.clear();
  int min_count = table.replications;
  for (const auto& name : estimator_order) {
    EstimatorRow row;
    row.estimator = name;
    std::vector<double> mse, ar, value;
    for (const auto& rec : table.records) {
      if (rec.estimator != name) {
        continue;
      }
      if (rec.failed) {
        ++row.failures;
        continue;
      }
      mse.push_back(rec.mse);
      ar.push_back(rec.ar);
      value.push_back(rec.value);
    }
    row.mse = summarize(mse, table.spread);
    row.ar = summarize(ar, table.spread);
    row.value = summarize(value, table.spread);
    min_count = std::min(min_count, row.mse.count);
    if (row.failures > 0) {
      table.warnings.push_back(name + ": " + std::to_string(row.failures) + " of " +
                               std::to_string(table.replications) +
                               " replications failed and were excluded");
    }
    table.rows.push_back(std::move(row));
  }
  std::vector<double> max_values(static_cast<std::size_t>(table.replications), std::nan(""));
  for (const auto& rec : table.records) {
    max_values[static_cast<std::size_t>(rec.replication)] = rec.max_value;
  }
  std::vector<double> present;
  for (double v : max_values) {
    if (!std::isnan(v)) {
      present.push_back(v);
    }
  }
  table.max_value = summarize(present, table.spread);
  table.se_defined = min_count >= 2;
  if (!table.se_defined) {
    table.warnings.push_back("fewer than two replications contributed; standard errors reported as 0");
  }
}

MetricsTable run_replications(const SimulationConfig& config) {
  config.validate();
  const dgp::TrueModel truth(config.setting);
  std::vector<cate::EstimatorSpec> specs = config.estimators;
  std::vector<std::string> names;
  for (const auto& s : specs) {
    names.push_back(s.name());
  }
  if (config.include_wald) {
    names.push_back("Wald");
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (names[i] == names[j]) {
        throw DomainError("estimator '" + names[i] + "' listed twice");
      }
    }
  }
  const std::size_t per_rep = names.size();
  const auto reps = static_cast<std::size_t>(config.replications);
  std::vector<ReplicationRecord> records(reps * per_rep);

  nuisance::NuisanceOptions base = config.nuisance;
  if (config.workers > 1) {
    base.forest.workers = 1;
  }

  parallel_for(reps, config.workers, [&](std::size_t r) {
    const auto rep = static_cast<std::uint64_t>(r);
    ReplicationRecord* out = &records[r * per_rep];
    for (std::size_t k = 0; k < per_rep; ++k) {
      out[k].replication = static_cast<int>(r);
      out[k].estimator = names[k];
    }
    const auto train = dgp::generate_dataset(config.setting, config.n_train,
                                             derive_seed({config.master_seed, rep, 1}));
    const std::uint64_t test_seed = config.redraw_test ? derive_seed({config.master_seed, rep, 2})
                                                       : derive_seed({config.master_seed, 2});
    const Matrix test_x = dgp::generate_covariates(config.n_test, test_seed);
    const double max_value = dgp::empirical_max_value(truth, test_x);
    Vector true_cate(test_x.rows());
    Vector true_h(test_x.rows());
    for (Eigen::Index i = 0; i < test_x.rows(); ++i) {
      const Vector x = test_x.row(i).transpose();
      true_cate[i] = truth.cate(x);
      true_h[i] = truth.h(x);
    }
    for (std::size_t k = 0; k < per_rep; ++k) {
      out[k].max_value = max_value;
    }

    nuisance::NuisanceOptions opts = base;
    opts.seed = derive_seed({config.master_seed, rep, 3});
    std::optional<nuisance::NuisanceSet> nuisances;
    try {
      nuisances.emplace(inject_misspecification(nuisance::fit_nuisances(train.data, opts),
                                                config.misspecification, config.setting,
                                                train.data, opts));
    } catch (const std::exception& e) {
      for (std::size_t k = 0; k < per_rep; ++k) {
        out[k].failed = true;
        out[k].error = std::string("nuisance fit: ") + e.what();
      }
      return;
    }
    const std::uint64_t fingerprint = nuisances->fingerprint();

    auto score = [&](ReplicationRecord& rec, const cate::CateModel& model) {
      rec.nuisance_fingerprint = fingerprint;
      const Vector pred = model.predict(test_x);
      rec.mse = mse_of(pred, true_cate);
      rec.ar = ar_of(pred, true_cate);
      rec.value = value_of(pred, true_cate, true_h);
      if (!std::isfinite(rec.mse) || !std::isfinite(rec.value)) {
        throw NumericalError("non-finite metric");
      }
    };
    for (std::size_t k = 0; k < per_rep; ++k) {
      try {
        if (k < specs.size()) {
          cate::EstimatorSpec spec = specs[k];
          spec.seed = derive_seed({config.master_seed, rep, 4, static_cast<std::uint64_t>(k)});
          score(out[k], cate::fit_cate(train.data, *nuisances, spec));
        } else {
          score(out[k], cate::plugin_wald_model(*nuisances, train.data.dim()));
        }
      } catch (const std::exception& e) {
        out[k].failed = true;
        out[k].error = e.what();
      }
    }
  });

  MetricsTable table;
  table.setting = config.setting;
  table.replications = config.replications;
  table.n_train = config.n_train;
  table.n_test = config.n_test;
  table.spread = config.spread;
  table.records = std::move(records);
  aggregate(table, names);
  return table;
}

namespace {

std::string cell(const MetricSummary& s, bool se_defined) {
  if (s.count == 0) {
    return "failed";
  }
  char buf[64];
  if (se_defined) {
    std::snprintf(buf, sizeof buf, "%.1f(%.1f)", 100.0 * s.mean, 100.0 * s.se);
  } else {
    std::snprintf(buf, sizeof buf, "%.1f(-)", 100.0 * s.mean);
  }
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string format_table(const MetricsTable& table) {
  std::ostringstream os;
  os << "Setting " << dgp::to_string(table.setting) << ": n_train=" << table.n_train
     << ", n_test=" << table.n_test << ", replications=" << table.replications << "\n";
  os << "mean x 1e-2 (" << (table.spread == SpreadKind::StandardError ? "SE" : "SD")
     << " x 1e-2)\n";
  std::size_t width = 10;
  for (const auto& r : table.rows) {
    width = std::max(width, r.estimator.size() + 2);
  }
  const std::size_t col = 14;
  os << pad("Method", width) << pad("MSE", col) << pad("AR", col) << pad("Value", col)
     << "Failures\n";
  for (const auto& r : table.rows) {
    os << pad(r.estimator, width) << pad(cell(r.mse, table.se_defined), col)
       << pad(cell(r.ar, table.se_defined), col) << pad(cell(r.value, table.se_defined), col)
       << r.failures << "\n";
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", table.max_value.mean);
  os << "Empirical maximum value: " << buf << "\n";
  for (const auto& w : table.warnings) {
    os << "warning: " << w << "\n";
  }
  return os.str();
}

std::string summary_csv(const MetricsTable& table) {
  std::ostringstream os;
  os << "setting,estimator,metric,mean,se,failures\n";
  const int setting = static_cast<int>(table.setting);
  auto line = [&](const std::string& est, const char* metric, const MetricSummary& s, int failures) {
    os << setting << ',' << est << ',' << metric << ',' << io::format_double(s.mean) << ','
       << io::format_double(s.se) << ',' << failures << "\n";
  };
  for (const auto& r : table.rows) {
    line(r.estimator, "mse", r.mse, r.failures);
    line(r.estimator, "ar", r.ar, r.failures);
    line(r.estimator, "value", r.value, r.failures);
  }
  line("oracle", "max_value", table.max_value, 0);
  return os.str();
}

std::string replications_csv(const MetricsTable& table) {
  std::ostringstream os;
  os << "setting,replication,estimator,metric,value\n";
  const int setting = static_cast<int>(table.setting);
  for (const auto& rec : table.records) {
    auto line = [&](const char* metric, const std::string& v) {
      os << setting << ',' << rec.replication << ',' << rec.estimator << ',' << metric << ',' << v
         << "\n";
    };
    if (rec.failed) {
      line("mse", "NA");
      line("ar", "NA");
      line("value", "NA");
    } else {
      line("mse", io::format_double(rec.mse));
      line("ar", io::format_double(rec.ar));
      line("value", io::format_double(rec.value));
    }
    line("max_value", io::format_double(rec.max_value));
  }
  return os.str();
}

}  // namespace ivdl::eval
