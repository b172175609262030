#pragma once

#include <string>
#include <vector>

namespace abcf {

// Minimal CSV handling for the file formats this project reads and writes:
// comma-separated, first row is the header, no quoting or embedded commas.
// Numeric formatting uses shortest round-trip representation so outputs are
// byte-stable across runs and platforms with the same libc.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;             // -1 if absent
  int require_column(const std::string& name) const;     // DataError if absent
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

std::string format_double(double v);
// Parses a full string as a double; DataError naming row/column on failure.
double parse_double(const std::string& s, const std::string& context);
long parse_long(const std::string& s, const std::string& context);

}  // namespace abcf
