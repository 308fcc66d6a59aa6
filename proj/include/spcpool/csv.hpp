#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace spcpool::csv {

// One parsed record plus the line it started on (1-based, for error messages).
struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Record> records;
};

// RFC-4180 style: comma separated, double quotes around fields that need
// them, "" escapes a quote, newlines allowed inside quoted fields.
Table read_file(const std::filesystem::path& path);
Table parse(const std::string& text, const std::string& origin);

std::string quote(const std::string& field);

// Shortest round-trip formatting; keeps output files byte-stable.
std::string format_double(double v);

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);

  void row(const std::vector<std::string>& fields);

 private:
  std::ofstream out_;
};

}  // namespace spcpool::csv
