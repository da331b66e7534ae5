#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ivdl/cli.hpp"
#include "ivdl/config.hpp"

int main(int argc, char** argv) {
  using namespace ivdl::cli;
  CLI::App app{"CATE and treatment-regime estimation with a binary instrument"};
  app.require_subcommand(1);
  app.footer("Config keys for `simulate` (TOML sections; unknown keys are errors):\n" +
             ivdl::config::describe_keys() +
             "\nEnvironment:\n  " + std::string(kWorkersEnv) +
             "  default worker count when neither --workers nor simulation.workers is set\n"
             "\nExit codes: 0 success, 1 runtime failure, 2 invalid input or config");

  SimulateOptions sim;
  std::uint64_t sim_seed = 0;
  int sim_workers = 0;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "run a replication study from a config file");
  simulate->add_option("--config", sim.config, "config file")->required();
  auto* sim_out_opt = simulate->add_option("--out", sim_out, "output directory (overrides output.dir)");
  auto* sim_workers_opt = simulate->add_option("--workers", sim_workers, "parallel replications");
  auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "overrides simulation.master_seed");

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "estimate the CATE on a CSV dataset");
  fit_cmd->add_option("--data", fit.data, "input CSV with a header row")->required();
  fit_cmd->add_option("--outcome", fit.outcome, "outcome column")->required();
  fit_cmd->add_option("--treatment", fit.treatment, "treatment column, {0,1} or {-1,1}")->required();
  fit_cmd->add_option("--instrument", fit.instrument, "instrument column, {0,1} or {-1,1}")->required();
  fit_cmd->add_option("--covariates", fit.covariates, "covariate columns (default: all other columns)")
      ->delimiter(',');
  fit_cmd->add_option("--method", fit.method, "ivdl, ivrdl1 or ivrdl2")->capture_default_str();
  fit_cmd->add_option("--learner", fit.learner, "linear, lasso or krr")->capture_default_str();
  fit_cmd->add_option("--h-variant", fit.h_variant, "IV-RDL2 residualizer: h1, h2 or h3")
      ->capture_default_str();
  double lambda = 0.0;
  double bandwidth = 0.0;
  auto* lambda_opt = fit_cmd->add_option("--lambda", lambda, "lasso/krr penalty (default: cross-validated)");
  auto* bw_opt = fit_cmd->add_option("--bandwidth", bandwidth, "krr bandwidth (default: median heuristic)");
  fit_cmd->add_option("--seed", fit.seed, "seed for forests and cross-validation")->capture_default_str();
  fit_cmd->add_option("--out", fit.out, "output directory")->required();

  SubgroupOptions sub;
  auto* sub_cmd = app.add_subcommand("subgroups", "summarize estimated CATE with a regression tree");
  sub_cmd->add_option("--cate", sub.cate, "cate.csv written by `fit`")->required();
  sub_cmd->add_option("--data", sub.data, "the CSV passed to `fit`")->required();
  sub_cmd->add_option("--covariates", sub.covariates, "split columns (default: all but y, a, z, row_id)")
      ->delimiter(',');
  sub_cmd->add_option("--min-leaf", sub.min_leaf, "minimum leaf size")->capture_default_str();
  sub_cmd->add_option("--max-depth", sub.max_depth, "maximum depth, 0 = unlimited")->capture_default_str();
  sub_cmd->add_option("--out", sub.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  if (simulate->parsed()) {
    if (*sim_out_opt) sim.out = sim_out;
    if (*sim_workers_opt) sim.workers = sim_workers;
    if (*sim_seed_opt) sim.seed = sim_seed;
    return cmd_simulate(sim, std::cout, std::cerr);
  }
  if (fit_cmd->parsed()) {
    if (*lambda_opt) fit.lambda = lambda;
    if (*bw_opt) fit.bandwidth = bandwidth;
    return cmd_fit(fit, std::cout, std::cerr);
  }
  return cmd_subgroups(sub, std::cout, std::cerr);
}
