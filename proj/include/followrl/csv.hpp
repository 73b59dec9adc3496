#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace followrl::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number in the file
  std::vector<std::string> cells;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  /// Column index by name, or throws ValidationError naming the file.
  std::size_t column(std::string_view name) const;
};

/// Reads a comma-separated file with a header line. Blank lines are skipped.
Table read(const std::filesystem::path& path);

/// Requires the header to equal `expected` exactly.
void expect_header(const Table& table, const std::vector<std::string>& expected,
                   const std::filesystem::path& path);

/// Parses a finite double, or throws ValidationError naming the line.
double parse_double(const std::string& cell, std::size_t line, const std::filesystem::path& path);

/// Shortest text that parses back to the identical double.
std::string format(double value);

}  // namespace followrl::csv
