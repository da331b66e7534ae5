#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ivdl::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based line number of each row in the source file.
  std::vector<std::size_t> lines;

  // Index of a named column, or throws ParseError.
  std::size_t column(const std::string& name) const;
};

// Comma-separated, header required, '.' decimal point.
CsvTable read_csv(const std::string& path);

// Shortest round-trip representation, independent of locale.
std::string format_double(double v);

// Strict number parsing; returns false for empty or non-numeric text.
bool parse_double(const std::string& text, double& out);

void ensure_directory(const std::string& path);

void write_text(const std::string& path, const std::string& content);

}  // namespace ivdl::io
