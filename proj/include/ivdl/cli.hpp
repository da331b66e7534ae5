#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ivdl/common.hpp"

namespace ivdl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInput = 2;

inline constexpr const char* kWorkersEnv = "IVDL_WORKERS";

struct SimulateOptions {
  std::string config;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
};

// Runs the configured replications and writes table.txt, summary.csv and
// replications.csv. Worker count: --workers, then the config key, then
// IVDL_WORKERS, then 1.
int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err);

struct FitOptions {
  std::string data;
  std::string outcome;
  std::string treatment;
  std::string instrument;
  // Empty: every column not bound to a role.
  std::vector<std::string> covariates;
  std::string method = "ivrdl1";
  std::string learner = "linear";
  std::string h_variant = "h3";
  std::optional<double> lambda;
  std::optional<double> bandwidth;
  std::string out;
  std::uint64_t seed = 1;
};

// Writes cate.csv (row_id,cate_hat,regime), model.json and nuisances.csv.
int cmd_fit(const FitOptions& options, std::ostream& out, std::ostream& err);

struct SubgroupOptions {
  std::string cate;
  std::string data;
  // Empty: every data column except y, a, z and row_id.
  std::vector<std::string> covariates;
  int min_leaf = 50;
  int max_depth = 3;
  std::string out;
};

// Fits one regression tree of cate_hat on the covariates, prints it and
// writes tree.txt and tree.json.
int cmd_subgroups(const SubgroupOptions& options, std::ostream& out, std::ostream& err);

struct UserDataset {
  ObservedDataset data;
  std::vector<std::string> covariate_names;
  // Zero-based data-row index in the source file for each kept record.
  std::vector<std::size_t> row_ids;
  std::size_t dropped = 0;
};

// Reads a CSV, binds column roles and normalizes {0,1} codings to {-1,+1}.
// Rows with a missing value (empty, NA, nan) in a role column are dropped.
UserDataset load_user_dataset(const std::string& path, const std::string& outcome,
                              const std::string& treatment, const std::string& instrument,
                              const std::vector<std::string>& covariates);

}  // namespace ivdl::cli
