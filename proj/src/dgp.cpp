#include "ivdl/dgp.hpp"

#include <cmath>
#include <sstream>

#include "ivdl/bridge.hpp"
#include "ivdl/io.hpp"
#include "ivdl/quadrature.hpp"
#include "ivdl/rng.hpp"

namespace ivdl::dgp {

namespace {

constexpr double kQuadratureWindow = 60.0;
constexpr double kQuadratureTolerance = 1e-8;

void check_dim(const Vector& x) {
  if (x.size() != kCovariates) {
    throw DimensionError("synthetic settings use 5 covariates, got " + std::to_string(x.size()));
  }
}

}  // namespace

SettingId setting_from_int(int id) {
  switch (id) {
    case 1:
      return SettingId::Setting1;
    case 2:
      return SettingId::Setting2;
    case 3:
      return SettingId::Setting3;
    case 4:
      return SettingId::Setting4;
    default:
      throw DomainError("setting must be 1, 2, 3 or 4, got " + std::to_string(id));
  }
}

std::string to_string(SettingId id) { return std::to_string(static_cast<int>(id)); }

double TrueModel::h(const Vector& x) const {
  check_dim(x);
  return 0.5 + 0.5 * x[0] + 0.8 * x[1] + 0.3 * x[2] - 0.5 * x[3] + 0.7 * x[4];
}

double TrueModel::q(const Vector& x) const {
  check_dim(x);
  return 0.2 - 0.6 * x[0] - 0.8 * x[1];
}

double TrueModel::treatment_coefficient(const Vector& x) const {
  return linear_outcome() ? q(x) : std::exp(q(x)) - 1.0;
}

double TrueModel::cate(const Vector& x) const { return 2.0 * treatment_coefficient(x); }

double TrueModel::confounder_loading() const { return linear_outcome() ? 0.5 : 1.0; }

double TrueModel::pi_z_true(const Vector& x) const {
  check_dim(x);
  if (setting_ == SettingId::Setting1 || setting_ == SettingId::Setting2) {
    return 0.5;
  }
  return expit(2.0 * x[0]);
}

double TrueModel::treatment_probability(const Vector& x, int z, double u) const {
  check_dim(x);
  return expit(2.0 * x[0] + 2.5 * z - 0.5 * u);
}

double TrueModel::marginal_p_a(const Vector& x, int z) const {
  check_dim(x);
  const double x1 = x[0];
  auto integrand = [x1, z](double u) {
    return expit(2.0 * x1 + 2.5 * z - 0.5 * u) * bridge::density(u, kBridgePhi);
  };
  return integrate(integrand, -kQuadratureWindow, kQuadratureWindow, kQuadratureTolerance).value;
}

double TrueModel::mu_a(const Vector& x, int z) const { return 2.0 * marginal_p_a(x, z) - 1.0; }

double TrueModel::mu_y(const Vector& x, int z) const {
  // U is independent of (X, Z) with mean zero, eps has mean zero.
  return h(x) + treatment_coefficient(x) * mu_a(x, z);
}

double TrueModel::delta(const Vector& x) const {
  return marginal_p_a(x, 1) - marginal_p_a(x, -1);
}

double TrueModel::outcome(const Vector& x, int a, const LatentRecord& latent) const {
  return h(x) + treatment_coefficient(x) * a + confounder_loading() * latent.u + latent.eps;
}

GeneratedData generate_dataset(SettingId setting, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) {
    throw DomainError("generate_dataset needs n >= 1");
  }
  const TrueModel model(setting);
  Rng rng(seed);
  GeneratedData out;
  auto& d = out.data;
  d.y.resize(n);
  d.x.resize(n, kCovariates);
  d.a.resize(n);
  d.z.resize(n);
  out.latent.resize(static_cast<std::size_t>(n));
  Vector xi(kCovariates);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < kCovariates; ++j) {
      xi[j] = rng.uniform(-1.0, 1.0);
    }
    const int z = rng.bernoulli(model.pi_z_true(xi)) ? 1 : -1;
    LatentRecord latent;
    latent.u = bridge::sample(kBridgePhi, rng.uniform());
    const int a = rng.bernoulli(model.treatment_probability(xi, z, latent.u)) ? 1 : -1;
    latent.eps = rng.normal();
    d.x.row(i) = xi.transpose();
    d.z[i] = z;
    d.a[i] = a;
    d.y[i] = model.outcome(xi, a, latent);
    out.latent[static_cast<std::size_t>(i)] = latent;
  }
  return out;
}

Matrix generate_covariates(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, kCovariates);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < kCovariates; ++j) {
      x(i, j) = rng.uniform(-1.0, 1.0);
    }
  }
  return x;
}

double marginal_treatment_probability(const TrueModel& model, const Vector& x, int z) {
  return model.marginal_p_a(x, z);
}

double oracle_cate(const TrueModel& model, const Vector& x) { return model.cate(x); }

double oracle_value(const TrueModel& model, const Regime& regime, const Matrix& test_x) {
  double total = 0.0;
  Vector x;
  for (Eigen::Index i = 0; i < test_x.rows(); ++i) {
    x = test_x.row(i).transpose();
    total += model.h(x) + model.treatment_coefficient(x) * regime(x);
  }
  return total / static_cast<double>(test_x.rows());
}

double empirical_max_value(const TrueModel& model, const Matrix& test_x) {
  return oracle_value(
      model, [&model](const Vector& x) { return sign_of(model.cate(x)); }, test_x);
}

void write_dataset_csv(const std::string& path, const ObservedDataset& data) {
  std::ostringstream out;
  out << "y";
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    out << ",x" << (j + 1);
  }
  out << ",a,z\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    out << io::format_double(data.y[i]);
    for (Eigen::Index j = 0; j < data.dim(); ++j) {
      out << ',' << io::format_double(data.x(i, j));
    }
    out << ',' << data.a[i] << ',' << data.z[i] << '\n';
  }
  io::write_text(path, out.str());
}

void write_latent_csv(const std::string& path, const std::vector<LatentRecord>& latent) {
  std::ostringstream out;
  out << "u,eps\n";
  for (const auto& r : latent) {
    out << io::format_double(r.u) << ',' << io::format_double(r.eps) << '\n';
  }
  io::write_text(path, out.str());
}

}  // namespace ivdl::dgp
