#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ivdl/common.hpp"

namespace ivdl::dgp {

enum class SettingId { Setting1 = 1, Setting2 = 2, Setting3 = 3, Setting4 = 4 };

SettingId setting_from_int(int id);
std::string to_string(SettingId id);

inline constexpr int kCovariates = 5;
inline constexpr double kBridgePhi = 0.5;

struct LatentRecord {
  double u = 0.0;
  double eps = 0.0;
};

// Oracle access to the data-generating process. Only the evaluation layer
// and tests should look at this.
class TrueModel {
 public:
  explicit TrueModel(SettingId setting) : setting_(setting) {}

  SettingId setting() const { return setting_; }
  bool linear_outcome() const { return setting_ != SettingId::Setting2; }

  double h(const Vector& x) const;
  double q(const Vector& x) const;
  double cate(const Vector& x) const;
  // Coefficient on A in the outcome model, i.e. cate(x)/2.
  double treatment_coefficient(const Vector& x) const;
  // Coefficient on U in the outcome model.
  double confounder_loading() const;

  // P[Z = +1 | X = x].
  double pi_z_true(const Vector& x) const;

  // P[A = +1 | X = x, Z = z, U = u].
  double treatment_probability(const Vector& x, int z, double u) const;

  // P[A = +1 | X = x, Z = z], integrating the confounder out.
  double marginal_p_a(const Vector& x, int z) const;

  // E[Y | Z = z, X = x] and E[A | Z = z, X = x] under +1/-1 coding.
  double mu_y(const Vector& x, int z) const;
  double mu_a(const Vector& x, int z) const;

  // delta(x) = P[A=1|Z=1,x] - P[A=1|Z=-1,x].
  double delta(const Vector& x) const;

  double outcome(const Vector& x, int a, const LatentRecord& latent) const;

 private:
  SettingId setting_;
};

struct GeneratedData {
  ObservedDataset data;
  std::vector<LatentRecord> latent;
};

// Bit-reproducible given (setting, n, seed). Throws DomainError for n == 0.
GeneratedData generate_dataset(SettingId setting, Eigen::Index n, std::uint64_t seed);

// Covariates only, Uniform(-1, 1)^5; used for evaluation test samples.
Matrix generate_covariates(Eigen::Index n, std::uint64_t seed);

double marginal_treatment_probability(const TrueModel& model, const Vector& x, int z);

double oracle_cate(const TrueModel& model, const Vector& x);

using Regime = std::function<int(const Vector&)>;

// Mean over rows of h(x) + (cate(x)/2) * regime(x).
double oracle_value(const TrueModel& model, const Regime& regime, const Matrix& test_x);

// Value of sign(cate(x)), the best attainable on the given sample.
double empirical_max_value(const TrueModel& model, const Matrix& test_x);

void write_dataset_csv(const std::string& path, const ObservedDataset& data);
void write_latent_csv(const std::string& path, const std::vector<LatentRecord>& latent);

}  // namespace ivdl::dgp
