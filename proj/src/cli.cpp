#include "ivdl/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ivdl/config.hpp"
#include "ivdl/estimator.hpp"
#include "ivdl/evaluation.hpp"
#include "ivdl/forest.hpp"
#include "ivdl/io.hpp"
#include "ivdl/nuisance.hpp"
#include "ivdl/rng.hpp"

namespace ivdl::cli {

namespace {

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty() || dir.back() == '/') {
    return dir + name;
  }
  return dir + "/" + name;
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "null";
}

std::optional<int> env_workers() {
  const char* raw = std::getenv(kWorkersEnv);
  if (raw == nullptr || *raw == '\0') {
    return std::nullopt;
  }
  double v = 0.0;
  if (!io::parse_double(raw, v) || v < 1.0 || v != static_cast<int>(v)) {
    throw ParseError(std::string(kWorkersEnv) + " must be a positive integer, got '" + raw + "'");
  }
  return static_cast<int>(v);
}

}  // namespace

int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const config::Document doc = config::parse_file(options.config);
    config::RunConfig rc = config::build_run_config(doc);
    auto& sim = rc.simulation;
    bool workers_in_config = false;
    if (auto it = doc.sections.find("simulation"); it != doc.sections.end()) {
      workers_in_config = it->second.count("workers") != 0;
    }
    if (options.workers) {
      if (*options.workers < 1) {
        throw ParseError("--workers must be >= 1");
      }
      sim.workers = *options.workers;
    } else if (!workers_in_config) {
      sim.workers = env_workers().value_or(1);
    }
    if (options.seed) {
      sim.master_seed = *options.seed;
    }
    if (options.out) {
      rc.output_dir = *options.out;
    }
    const eval::MetricsTable table = eval::run_replications(sim);
    const std::string text = eval::format_table(table);
    io::ensure_directory(rc.output_dir);
    io::write_text(join_path(rc.output_dir, "table.txt"), text);
    io::write_text(join_path(rc.output_dir, "summary.csv"), eval::summary_csv(table));
    if (rc.write_replications) {
      io::write_text(join_path(rc.output_dir, "replications.csv"), eval::replications_csv(table));
    }
    out << text;
    return kExitOk;
  });
}

UserDataset load_user_dataset(const std::string& path, const std::string& outcome,
                              const std::string& treatment, const std::string& instrument,
                              const std::vector<std::string>& covariates) {
  const io::CsvTable csv = io::read_csv(path);
  const std::set<std::string> roles = {outcome, treatment, instrument};
  if (roles.size() != 3) {
    throw ParseError("outcome, treatment and instrument must be three different columns");
  }
  UserDataset out;
  out.covariate_names = covariates;
  if (out.covariate_names.empty()) {
    for (const auto& h : csv.header) {
      if (roles.count(h) == 0) {
        out.covariate_names.push_back(h);
      }
    }
  }
  if (out.covariate_names.empty()) {
    throw ParseError(path + ": no covariate columns");
  }
  for (const auto& c : out.covariate_names) {
    if (roles.count(c) != 0) {
      throw ParseError("column '" + c + "' cannot be both a covariate and a role");
    }
  }
  const std::size_t iy = csv.column(outcome);
  const std::size_t ia = csv.column(treatment);
  const std::size_t iz = csv.column(instrument);
  std::vector<std::size_t> ix;
  for (const auto& c : out.covariate_names) {
    ix.push_back(csv.column(c));
  }

  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    bool missing = is_missing(row[iy]) || is_missing(row[ia]) || is_missing(row[iz]);
    for (auto c : ix) {
      missing = missing || is_missing(row[c]);
    }
    if (missing) {
      ++out.dropped;
    } else {
      kept.push_back(r);
    }
  }
  if (kept.empty()) {
    throw ParseError(path + ": no complete rows");
  }

  const auto n = static_cast<Eigen::Index>(kept.size());
  const auto p = static_cast<Eigen::Index>(ix.size());
  ObservedDataset& d = out.data;
  d.y.resize(n);
  d.x.resize(n, p);
  d.a.resize(n);
  d.z.resize(n);
  auto number = [&](std::size_t r, std::size_t c) {
    double v = 0.0;
    if (!io::parse_double(csv.rows[r][c], v)) {
      throw ParseError(path + ":" + std::to_string(csv.lines[r]) + ": column '" + csv.header[c] +
                       "' is not numeric: '" + csv.rows[r][c] + "'");
    }
    return v;
  };
  // Binary columns: {0,1} or {-1,1}, one coding per column; 0 maps to -1.
  auto binary = [&](std::size_t c) {
    std::set<double> seen;
    for (auto r : kept) {
      seen.insert(number(r, c));
    }
    const bool zero_one = seen.count(0.0) != 0;
    for (double v : seen) {
      const bool ok = zero_one ? (v == 0.0 || v == 1.0) : (v == -1.0 || v == 1.0);
      if (!ok) {
        throw ParseError(path + ": column '" + csv.header[c] +
                         "' must be coded {0,1} or {-1,1}, found " + io::format_double(v));
      }
    }
    Eigen::VectorXi coded(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      coded[i] = number(kept[static_cast<std::size_t>(i)], c) == 1.0 ? 1 : -1;
    }
    return coded;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = kept[static_cast<std::size_t>(i)];
    d.y[i] = number(r, iy);
    for (Eigen::Index j = 0; j < p; ++j) {
      d.x(i, j) = number(r, ix[static_cast<std::size_t>(j)]);
    }
  }
  d.a = binary(ia);
  d.z = binary(iz);
  out.row_ids = std::move(kept);
  return out;
}

int cmd_fit(const FitOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    cate::EstimatorSpec spec;
    try {
      spec.method = cate::method_from_string(options.method);
      spec.learner.kind = cate::learner_from_string(options.learner);
    } catch (const DomainError& e) {
      throw ParseError(e.what());
    }
    if (options.h_variant == "h1") {
      spec.variant = nuisance::HVariant::H1;
    } else if (options.h_variant == "h2") {
      spec.variant = nuisance::HVariant::H2;
    } else if (options.h_variant == "h3") {
      spec.variant = nuisance::HVariant::H3;
    } else {
      throw ParseError("--h-variant must be h1, h2 or h3");
    }
    spec.learner.lambda = options.lambda;
    spec.learner.bandwidth = options.bandwidth;
    spec.seed = derive_seed({options.seed, 4});

    const UserDataset ud = load_user_dataset(options.data, options.outcome, options.treatment,
                                             options.instrument, options.covariates);
    if (ud.dropped > 0) {
      err << "dropped " << ud.dropped << " row(s) with missing values\n";
    }
    nuisance::NuisanceOptions nopts;
    nopts.seed = derive_seed({options.seed, 3});
    const nuisance::NuisanceSet nuisances = nuisance::fit_nuisances(ud.data, nopts);
    const cate::CateModel model = cate::fit_cate(ud.data, nuisances, spec);
    const Vector cate_hat = model.predict(ud.data.x);

    std::ostringstream csv;
    csv << "row_id,cate_hat,regime\n";
    for (Eigen::Index i = 0; i < cate_hat.size(); ++i) {
      csv << ud.row_ids[static_cast<std::size_t>(i)] << ',' << io::format_double(cate_hat[i]) << ','
          << sign_of(cate_hat[i]) << '\n';
    }
    nlohmann::json j = model.to_json();
    j["covariates"] = ud.covariate_names;
    j["learner"] = cate::to_string(spec.learner.kind);

    io::ensure_directory(options.out);
    io::write_text(join_path(options.out, "cate.csv"), csv.str());
    io::write_text(join_path(options.out, "model.json"), j.dump(2) + "\n");
    nuisance::write_nuisance_csv(join_path(options.out, "nuisances.csv"), ud.data, nuisances);

    Eigen::Index positive = 0;
    for (Eigen::Index i = 0; i < cate_hat.size(); ++i) {
      positive += cate_hat[i] >= 0.0 ? 1 : 0;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s on %ld rows: mean CATE %.4f, %ld recommended +1\n",
                  model.name().c_str(), static_cast<long>(cate_hat.size()), cate_hat.mean(),
                  static_cast<long>(positive));
    out << buf;
    return kExitOk;
  });
}

namespace {

struct TreeView {
  const learn::RegressionTree& tree;
  const std::vector<std::string>& names;
  std::vector<int> leaf_number;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void render(const TreeView& view, int k, const std::string& indent, std::ostream& os) {
  const auto& node = view.tree.nodes()[static_cast<std::size_t>(k)];
  if (node.feature < 0) {
    os << indent << "leaf " << view.leaf_number[static_cast<std::size_t>(k)]
       << ": mean " << fmt("%.4f", node.value) << ", " << fmt("%.1f", 100.0 * node.fraction)
       << "% (n=" << node.count << ")\n";
    return;
  }
  const std::string& name = view.names[static_cast<std::size_t>(node.feature)];
  os << indent << name << " <= " << fmt("%.4g", node.threshold) << "\n";
  render(view, node.left, indent + "  ", os);
  os << indent << name << " > " << fmt("%.4g", node.threshold) << "\n";
  render(view, node.right, indent + "  ", os);
}

nlohmann::json tree_json(const TreeView& view, int k) {
  const auto& node = view.tree.nodes()[static_cast<std::size_t>(k)];
  nlohmann::json j;
  j["mean"] = node.value;
  j["fraction"] = node.fraction;
  j["count"] = node.count;
  if (node.feature < 0) {
    j["leaf"] = view.leaf_number[static_cast<std::size_t>(k)];
    return j;
  }
  j["feature"] = view.names[static_cast<std::size_t>(node.feature)];
  j["threshold"] = node.threshold;
  j["left"] = tree_json(view, node.left);
  j["right"] = tree_json(view, node.right);
  return j;
}

void number_leaves(const learn::RegressionTree& tree, int k, std::vector<int>& numbers, int& next) {
  const auto& node = tree.nodes()[static_cast<std::size_t>(k)];
  if (node.feature < 0) {
    numbers[static_cast<std::size_t>(k)] = ++next;
    return;
  }
  number_leaves(tree, node.left, numbers, next);
  number_leaves(tree, node.right, numbers, next);
}

}  // namespace

int cmd_subgroups(const SubgroupOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (options.min_leaf < 1) {
      throw ParseError("--min-leaf must be >= 1");
    }
    if (options.max_depth < 0) {
      throw ParseError("--max-depth must be >= 0");
    }
    const io::CsvTable cate_csv = io::read_csv(options.cate);
    const io::CsvTable data = io::read_csv(options.data);
    const std::size_t id_col = cate_csv.column("row_id");
    const std::size_t cate_col = cate_csv.column("cate_hat");

    std::vector<std::string> names = options.covariates;
    if (names.empty()) {
      for (const auto& h : data.header) {
        if (h != "y" && h != "a" && h != "z" && h != "row_id") {
          names.push_back(h);
        }
      }
    }
    if (names.empty()) {
      throw ParseError(options.data + ": no covariate columns");
    }
    std::vector<std::size_t> cols;
    for (const auto& c : names) {
      cols.push_back(data.column(c));
    }

    const auto n = static_cast<Eigen::Index>(cate_csv.rows.size());
    if (n == 0) {
      throw ParseError(options.cate + ": no rows");
    }
    Matrix x(n, static_cast<Eigen::Index>(cols.size()));
    Vector t(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = cate_csv.rows[static_cast<std::size_t>(i)];
      const std::string where = options.cate + ":" + std::to_string(cate_csv.lines[static_cast<std::size_t>(i)]);
      double id = 0.0;
      if (!io::parse_double(row[id_col], id) || id < 0 || id != static_cast<double>(static_cast<std::size_t>(id)) ||
          static_cast<std::size_t>(id) >= data.rows.size()) {
        throw ParseError(where + ": row_id '" + row[id_col] + "' does not index a row of " +
                         options.data);
      }
      if (!io::parse_double(row[cate_col], t[i])) {
        throw ParseError(where + ": cate_hat is not numeric");
      }
      const auto& drow = data.rows[static_cast<std::size_t>(id)];
      for (std::size_t j = 0; j < cols.size(); ++j) {
        if (!io::parse_double(drow[cols[j]], x(i, static_cast<Eigen::Index>(j)))) {
          throw ParseError(options.data + ":" + std::to_string(data.lines[static_cast<std::size_t>(id)]) +
                           ": column '" + names[j] + "' is not numeric");
        }
      }
    }

    learn::TreeParams params;
    params.min_leaf = options.min_leaf;
    params.max_depth = options.max_depth;
    const learn::RegressionTree tree = learn::fit_tree(x, t, params);
    TreeView view{tree, names, std::vector<int>(tree.nodes().size(), 0)};
    int next = 0;
    number_leaves(tree, 0, view.leaf_number, next);

    std::ostringstream text;
    text << "Regression tree of cate_hat on " << n << " rows (min leaf " << options.min_leaf
         << ", max depth " << options.max_depth << ")\n";
    render(view, 0, "", text);
    nlohmann::json j;
    j["covariates"] = names;
    j["min_leaf"] = options.min_leaf;
    j["max_depth"] = options.max_depth;
    j["tree"] = tree_json(view, 0);

    io::ensure_directory(options.out);
    io::write_text(join_path(options.out, "tree.txt"), text.str());
    io::write_text(join_path(options.out, "tree.json"), j.dump(2) + "\n");
    out << text.str();
    return kExitOk;
  });
}

}  // namespace ivdl::cli
