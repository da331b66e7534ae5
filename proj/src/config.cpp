#include "ivdl/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ivdl/io.hpp"

namespace ivdl::config {

ConfigError::ConfigError(const std::string& file, int line, const std::string& message)
    : ParseError(file + ":" + std::to_string(line) + ": " + message), line_(line) {}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return "";
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') {
      quoted = !quoted;
    } else if (s[i] == '#' && !quoted) {
      return s.substr(0, i);
    }
  }
  return s;
}

bool valid_key(const std::string& k) {
  if (k.empty()) {
    return false;
  }
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) {
      return false;
    }
  }
  return true;
}

std::optional<std::string> parse_string(const std::string& t) {
  if (t.size() < 2 || t.front() != '"' || t.back() != '"') {
    return std::nullopt;
  }
  const std::string body = t.substr(1, t.size() - 2);
  if (body.find('"') != std::string::npos || body.find('\\') != std::string::npos) {
    return std::nullopt;
  }
  return body;
}

Value parse_value(const std::string& text, const std::string& file, int line) {
  const std::string t = trim(text);
  if (t.empty()) {
    throw ConfigError(file, line, "missing value");
  }
  if (t == "true") {
    return true;
  }
  if (t == "false") {
    return false;
  }
  if (t.front() == '"') {
    if (auto s = parse_string(t)) {
      return *s;
    }
    throw ConfigError(file, line, "malformed string " + t);
  }
  if (t.front() == '[') {
    if (t.back() != ']') {
      throw ConfigError(file, line, "arrays must close on the same line");
    }
    std::vector<std::string> items;
    std::stringstream ss(t.substr(1, t.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) {
        continue;
      }
      auto s = parse_string(item);
      if (!s) {
        throw ConfigError(file, line, "array items must be double-quoted strings, got " + item);
      }
      items.push_back(*s);
    }
    return items;
  }
  std::int64_t i = 0;
  const auto* first = t.data();
  const auto* last = t.data() + t.size();
  if (auto [p, ec] = std::from_chars(first, last, i); ec == std::errc() && p == last) {
    return i;
  }
  double d = 0.0;
  if (io::parse_double(t, d)) {
    return d;
  }
  throw ConfigError(file, line, "cannot parse value " + t);
}

}  // namespace

Document parse(const std::string& text, const std::string& file) {
  Document doc;
  doc.file = file;
  std::stringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) {
      continue;
    }
    if (s.front() == '[') {
      if (s.back() != ']') {
        throw ConfigError(file, line, "malformed section header " + s);
      }
      section = trim(s.substr(1, s.size() - 2));
      if (!valid_key(section)) {
        throw ConfigError(file, line, "malformed section name '" + section + "'");
      }
      doc.sections[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(file, line, "expected key = value");
    }
    const std::string key = trim(s.substr(0, eq));
    if (!valid_key(key)) {
      throw ConfigError(file, line, "malformed key '" + key + "'");
    }
    if (section.empty()) {
      throw ConfigError(file, line, "key '" + key + "' appears before any [section]");
    }
    auto& keys = doc.sections[section];
    if (keys.count(key) != 0) {
      throw ConfigError(file, line, "duplicate key " + section + "." + key);
    }
    keys[key] = Entry{parse_value(s.substr(eq + 1), file, line), line};
  }
  return doc;
}

Document parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open config " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

const std::vector<KeyDoc>& documented_keys() {
  static const std::vector<KeyDoc> keys = {
      {"simulation", "setting", "1", "data-generating setting, 1 to 4"},
      {"simulation", "n_train", "500", "training sample size per replication"},
      {"simulation", "n_test", "5000", "test sample size per replication"},
      {"simulation", "replications", "100", "number of replications, >= 1"},
      {"simulation", "master_seed", "1", "root seed; replication seeds are derived from it"},
      {"simulation", "redraw_test", "true", "draw a fresh test sample in every replication"},
      {"simulation", "spread", "\"se\"", "\"se\" (SD / sqrt(R)) or \"sd\""},
      {"simulation", "workers", "1", "replications run in parallel"},
      {"estimators", "methods", "[\"ivdl\", \"ivrdl1\", \"ivrdl2\"]",
       "estimators to fit: ivdl, ivrdl1, ivrdl2"},
      {"estimators", "h_variant", "\"h3\"", "IV-RDL2 residualizer: h1, h2 or h3"},
      {"estimators", "learner", "\"linear\"", "linear, lasso or krr"},
      {"estimators", "lambda", "\"cv\"", "lasso/krr penalty, or \"cv\" for 5-fold cross-validation"},
      {"estimators", "bandwidth", "\"median\"", "krr bandwidth, or \"median\" for the median heuristic"},
      {"estimators", "max_anchors", "4000", "krr fits on a subsample above this size"},
      {"estimators", "include_wald", "true", "also score the plug-in Wald estimator"},
      {"nuisance", "propensity", "\"forest\"", "instrument propensity: half, logistic or forest"},
      {"nuisance", "delta_learner", "\"forest\"", "P[A=1|Z,X] learner: forest or logistic"},
      {"nuisance", "mean_learner", "\"forest\"", "E[Y|Z,X] learner: forest or ols"},
      {"nuisance", "eps_pi", "0.01", "propensity clipping"},
      {"nuisance", "eps_delta", "0.05", "floor on |delta|"},
      {"nuisance", "num_trees", "500", "trees per forest"},
      {"nuisance", "mtry", "0", "features tried per split, 0 = ceil(p/3)"},
      {"nuisance", "min_leaf", "5", "minimum leaf size"},
      {"nuisance", "max_depth", "0", "maximum tree depth, 0 = unlimited"},
      {"nuisance", "out_of_bag", "true", "use out-of-bag forest predictions at training rows"},
      {"nuisance", "cross_fit_folds", "0", "K-fold cross-fitting, 0 or 1 = off"},
      {"misspecification", "flags", "[]",
       "wrong_propensity_half and/or ols_g_star (settings 3 and 4 only)"},
      {"output", "dir", "\"ivdl-out\"", "directory for the report files"},
      {"output", "write_replications", "true", "also write replications.csv"},
  };
  return keys;
}

std::string describe_keys() {
  std::ostringstream os;
  std::string section;
  for (const auto& k : documented_keys()) {
    if (k.section != section) {
      section = k.section;
      os << "[" << section << "]\n";
    }
    os << "  " << k.key << " = " << k.default_value << "\n      " << k.description << "\n";
  }
  return os.str();
}

namespace {

class Reader {
 public:
  Reader(const Document& doc, const std::string& section, const std::map<std::string, Entry>& keys)
      : doc_(doc), section_(section), keys_(keys) {}

  const Entry* find(const std::string& key) const {
    auto it = keys_.find(key);
    return it == keys_.end() ? nullptr : &it->second;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    const Entry* e = find(key);
    throw ConfigError(doc_.file, e ? e->line : 0, section_ + "." + key + ": " + message);
  }

  std::optional<std::int64_t> integer(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) {
      return std::nullopt;
    }
    if (const auto* v = std::get_if<std::int64_t>(&e->value)) {
      return *v;
    }
    fail(key, "expected an integer");
  }

  std::optional<double> real(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) {
      return std::nullopt;
    }
    if (const auto* v = std::get_if<double>(&e->value)) {
      return *v;
    }
    if (const auto* v = std::get_if<std::int64_t>(&e->value)) {
      return static_cast<double>(*v);
    }
    fail(key, "expected a number");
  }

  std::optional<bool> boolean(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) {
      return std::nullopt;
    }
    if (const auto* v = std::get_if<bool>(&e->value)) {
      return *v;
    }
    fail(key, "expected true or false");
  }

  std::optional<std::string> string(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) {
      return std::nullopt;
    }
    if (const auto* v = std::get_if<std::string>(&e->value)) {
      return *v;
    }
    fail(key, "expected a double-quoted string");
  }

  std::optional<std::vector<std::string>> list(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) {
      return std::nullopt;
    }
    if (const auto* v = std::get_if<std::vector<std::string>>(&e->value)) {
      return *v;
    }
    fail(key, "expected an array of strings");
  }

  // Number, or the given keyword meaning "automatic".
  std::optional<double> number_or(const std::string& key, const std::string& keyword,
                                  bool& automatic) const {
    const Entry* e = find(key);
    automatic = true;
    if (!e) {
      return std::nullopt;
    }
    if (const auto* s = std::get_if<std::string>(&e->value)) {
      if (*s == keyword) {
        return std::nullopt;
      }
      fail(key, "expected a number or \"" + keyword + "\"");
    }
    automatic = false;
    return real(key);
  }

 private:
  const Document& doc_;
  std::string section_;
  const std::map<std::string, Entry>& keys_;
};

template <class F>
auto translate(const Reader& r, const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    r.fail(key, e.what());
  }
}

}  // namespace

RunConfig build_run_config(const Document& doc) {
  RunConfig rc;
  auto& sim = rc.simulation;
  sim.estimators = eval::default_estimators();

  for (const auto& [section, keys] : doc.sections) {
    for (const auto& [key, entry] : keys) {
      bool known = false;
      for (const auto& k : documented_keys()) {
        known = known || (k.section == section && k.key == key);
      }
      if (!known) {
        throw ConfigError(doc.file, entry.line, "unknown key " + section + "." + key);
      }
    }
    bool known_section = false;
    for (const auto& k : documented_keys()) {
      known_section = known_section || k.section == section;
    }
    if (!known_section) {
      throw ConfigError(doc.file, keys.empty() ? 0 : keys.begin()->second.line,
                        "unknown section [" + section + "]");
    }
  }

  static const std::map<std::string, Entry> empty;
  auto section = [&](const std::string& name) {
    auto it = doc.sections.find(name);
    return Reader(doc, name, it == doc.sections.end() ? empty : it->second);
  };

  {
    const Reader r = section("simulation");
    if (auto v = r.integer("setting")) {
      translate(r, "setting", [&] { sim.setting = dgp::setting_from_int(static_cast<int>(*v)); });
    }
    if (auto v = r.integer("n_train")) {
      if (*v < 2) r.fail("n_train", "must be >= 2");
      sim.n_train = *v;
    }
    if (auto v = r.integer("n_test")) {
      if (*v < 1) r.fail("n_test", "must be >= 1");
      sim.n_test = *v;
    }
    if (auto v = r.integer("replications")) {
      if (*v < 1) r.fail("replications", "must be >= 1");
      sim.replications = static_cast<int>(*v);
    }
    if (auto v = r.integer("master_seed")) {
      if (*v < 0) r.fail("master_seed", "must be >= 0");
      sim.master_seed = static_cast<std::uint64_t>(*v);
    }
    if (auto v = r.boolean("redraw_test")) sim.redraw_test = *v;
    if (auto v = r.string("spread")) {
      if (*v == "se") {
        sim.spread = eval::SpreadKind::StandardError;
      } else if (*v == "sd") {
        sim.spread = eval::SpreadKind::StandardDeviation;
      } else {
        r.fail("spread", "expected \"se\" or \"sd\"");
      }
    }
    if (auto v = r.integer("workers")) {
      if (*v < 1) r.fail("workers", "must be >= 1");
      sim.workers = static_cast<int>(*v);
    }
  }

  {
    const Reader r = section("estimators");
    cate::LearnerSpec learner;
    nuisance::HVariant variant = nuisance::HVariant::H3;
    if (auto v = r.string("learner")) {
      translate(r, "learner", [&] { learner.kind = cate::learner_from_string(*v); });
    }
    bool automatic = true;
    if (auto v = r.number_or("lambda", "cv", automatic)) {
      if (!(*v > 0.0)) r.fail("lambda", "must be > 0");
      learner.lambda = *v;
    }
    if (auto v = r.number_or("bandwidth", "median", automatic)) {
      if (!(*v > 0.0)) r.fail("bandwidth", "must be > 0");
      learner.bandwidth = *v;
    }
    if (auto v = r.integer("max_anchors")) {
      if (*v < 2) r.fail("max_anchors", "must be >= 2");
      learner.max_anchors = *v;
    }
    if (auto v = r.string("h_variant")) {
      if (*v == "h1") {
        variant = nuisance::HVariant::H1;
      } else if (*v == "h2") {
        variant = nuisance::HVariant::H2;
      } else if (*v == "h3") {
        variant = nuisance::HVariant::H3;
      } else {
        r.fail("h_variant", "expected h1, h2 or h3");
      }
    }
    std::vector<std::string> methods = {"ivdl", "ivrdl1", "ivrdl2"};
    if (auto v = r.list("methods")) methods = *v;
    sim.estimators.clear();
    for (const auto& m : methods) {
      cate::EstimatorSpec spec;
      translate(r, "methods", [&] { spec.method = cate::method_from_string(m); });
      spec.variant = variant;
      spec.learner = learner;
      for (const auto& existing : sim.estimators) {
        if (existing.method == spec.method) r.fail("methods", "'" + m + "' listed twice");
      }
      sim.estimators.push_back(spec);
    }
    if (auto v = r.boolean("include_wald")) sim.include_wald = *v;
    if (sim.estimators.empty() && !sim.include_wald) {
      r.fail("methods", "no estimator left to run");
    }
  }

  {
    const Reader r = section("nuisance");
    auto& n = sim.nuisance;
    if (auto v = r.string("propensity")) {
      if (*v == "half") {
        n.propensity = nuisance::PropensityMode::KnownConstantHalf;
      } else if (*v == "logistic") {
        n.propensity = nuisance::PropensityMode::Logistic;
      } else if (*v == "forest") {
        n.propensity = nuisance::PropensityMode::Forest;
      } else {
        r.fail("propensity", "expected half, logistic or forest");
      }
    }
    if (auto v = r.string("delta_learner")) {
      if (*v == "forest") {
        n.delta_learner = nuisance::ProbabilityLearner::Forest;
      } else if (*v == "logistic") {
        n.delta_learner = nuisance::ProbabilityLearner::Logistic;
      } else {
        r.fail("delta_learner", "expected forest or logistic");
      }
    }
    if (auto v = r.string("mean_learner")) {
      if (*v == "forest") {
        n.mean_learner = nuisance::MeanLearner::Forest;
      } else if (*v == "ols") {
        n.mean_learner = nuisance::MeanLearner::Ols;
      } else {
        r.fail("mean_learner", "expected forest or ols");
      }
    }
    if (auto v = r.real("eps_pi")) {
      if (!(*v >= 0.0 && *v < 0.5)) r.fail("eps_pi", "must lie in [0, 0.5)");
      n.eps_pi = *v;
    }
    if (auto v = r.real("eps_delta")) {
      if (!(*v > 0.0 && *v <= 1.0)) r.fail("eps_delta", "must lie in (0, 1]");
      n.eps_delta = *v;
    }
    if (auto v = r.integer("num_trees")) {
      if (*v < 1) r.fail("num_trees", "must be >= 1");
      n.forest.num_trees = static_cast<int>(*v);
    }
    if (auto v = r.integer("mtry")) {
      if (*v < 0) r.fail("mtry", "must be >= 0");
      n.forest.mtry = static_cast<int>(*v);
    }
    if (auto v = r.integer("min_leaf")) {
      if (*v < 1) r.fail("min_leaf", "must be >= 1");
      n.forest.min_leaf = static_cast<int>(*v);
    }
    if (auto v = r.integer("max_depth")) {
      if (*v < 0) r.fail("max_depth", "must be >= 0");
      n.forest.max_depth = static_cast<int>(*v);
    }
    if (auto v = r.boolean("out_of_bag")) n.out_of_bag = *v;
    if (auto v = r.integer("cross_fit_folds")) {
      if (*v < 0) r.fail("cross_fit_folds", "must be >= 0");
      n.cross_fit_folds = static_cast<int>(*v);
    }
  }

  {
    const Reader r = section("misspecification");
    if (auto v = r.list("flags")) {
      for (const auto& f : *v) {
        if (f == "wrong_propensity_half") {
          sim.misspecification.wrong_propensity_half = true;
        } else if (f == "ols_g_star") {
          sim.misspecification.ols_g_star = true;
        } else if (f != "none") {
          r.fail("flags", "unknown flag '" + f + "'");
        }
      }
      if (!sim.misspecification.none() && sim.setting != dgp::SettingId::Setting3 &&
          sim.setting != dgp::SettingId::Setting4) {
        r.fail("flags", "misspecification needs setting 3 or 4");
      }
    }
  }

  {
    const Reader r = section("output");
    if (auto v = r.string("dir")) {
      if (v->empty()) r.fail("dir", "must not be empty");
      rc.output_dir = *v;
    }
    if (auto v = r.boolean("write_replications")) rc.write_replications = *v;
  }
  return rc;
}

}  // namespace ivdl::config
