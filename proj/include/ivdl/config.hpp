#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ivdl/common.hpp"
#include "ivdl/evaluation.hpp"

namespace ivdl::config {

// Line-anchored configuration error: "<file>:<line>: <message>".
class ConfigError : public ParseError {
 public:
  ConfigError(const std::string& file, int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

using Value = std::variant<bool, std::int64_t, double, std::string, std::vector<std::string>>;

struct Entry {
  Value value;
  int line = 0;
};

// Parsed document: section -> key -> entry. Supports `[section]` headers,
// `key = value` with integers, floats, booleans, double-quoted strings and
// one-line arrays of strings, and `#` comments.
struct Document {
  std::string file;
  std::map<std::string, std::map<std::string, Entry>> sections;
};

Document parse(const std::string& text, const std::string& file = "<string>");
Document parse_file(const std::string& path);

struct RunConfig {
  eval::SimulationConfig simulation;
  std::string output_dir = "ivdl-out";
  bool write_replications = true;
};

// Applies every key to a default RunConfig. Unknown sections or keys, wrong
// types and out-of-range values are ConfigErrors naming the key and line.
RunConfig build_run_config(const Document& doc);

struct KeyDoc {
  std::string section;
  std::string key;
  std::string default_value;
  std::string description;
};

// Every accepted key with its default, in document order.
const std::vector<KeyDoc>& documented_keys();

std::string describe_keys();

}  // namespace ivdl::config
