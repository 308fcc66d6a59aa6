#include "spcpool/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "spcpool/errors.hpp"

namespace spcpool::csv {

namespace {

// Splits raw text into records, tracking start lines. A lone trailing
// newline does not produce an empty record.
std::vector<Record> tokenize(const std::string& text, const std::string& origin) {
  std::vector<Record> records;
  Record current;
  std::string field;
  bool in_quotes = false;
  bool record_started = false;
  std::size_t line = 1;
  current.line = 1;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current = Record{};
    record_started = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (!record_started && c != '\n' && c != '\r') {
      record_started = true;
      current.line = line;
    }
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        record_started = true;
        break;
      case ',':
        record_started = true;
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        if (record_started || !current.fields.empty()) end_record();
        break;
      default:
        field += c;
    }
  }
  if (in_quotes) throw RowError(origin, current.line, "unterminated quoted field");
  if (record_started || !current.fields.empty()) end_record();
  return records;
}

}  // namespace

Table parse(const std::string& text, const std::string& origin) {
  auto records = tokenize(text, origin);
  if (records.empty()) throw SchemaError(origin + ": empty file, expected a header row");
  Table t;
  t.header = std::move(records.front().fields);
  records.erase(records.begin());
  t.records = std::move(records);
  return t;
}

Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open input file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::string quote(const std::string& field) {
  bool needs = field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Writer::Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
  if (!out_) throw Error("cannot open output file: " + path.string());
}

void Writer::row(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += quote(fields[i]);
  }
  line += '\n';
  out_ << line;
}

}  // namespace spcpool::csv
