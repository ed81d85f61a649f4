#include "coughkit/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "coughkit/errors.hpp"

namespace coughkit {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

std::string join_csv(const std::vector<std::string>& fields) {
  std::string out;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += fields[i];
  }
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::file_not_found, "cannot open CSV: " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != table.header.size())
        fail(Errc::schema_error, "CSV row width does not match header in " + path);
      table.rows.push_back(std::move(fields));
    }
  }
  if (first) fail(Errc::schema_error, "CSV has no header row: " + path);
  return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_error, "cannot write CSV: " + path);
  out << join_csv(table.header) << "\n";
  for (const auto& row : table.rows) out << join_csv(row) << "\n";
  if (!out) fail(Errc::io_error, "write failed: " + path);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace coughkit
