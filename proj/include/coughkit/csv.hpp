#pragma once

#include <string>
#include <vector>

namespace coughkit {

// Minimal CSV support. Fields are unquoted; none of the toolkit's formats
// embeds commas or newlines in a value.

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_csv_line(const std::string& line);
std::string join_csv(const std::vector<std::string>& fields);

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

/// Stable decimal formatting with 10 significant digits.
std::string format_double(double v);

}  // namespace coughkit
