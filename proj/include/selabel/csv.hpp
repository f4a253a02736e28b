#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "selabel/errors.hpp"

namespace selabel {

// Tabular data with a mandatory header row. Cells are kept as raw strings;
// numeric parsing happens per column with file/line/column error context.
struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> find_column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }

  std::size_t require_column(std::string_view name) const {
    if (auto idx = find_column(name)) return *idx;
    throw ValidationError(path + ": missing required column '" + std::string(name) + "'");
  }
};

namespace detail {

// Splits one CSV record. Handles quoted fields with doubled quotes; newlines
// inside quoted fields are not supported and surface as an unterminated-quote
// error.
inline std::vector<std::string> split_record(const std::string& record,
                                             const std::string& path,
                                             std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  for (std::size_t i = 0; i < record.size(); ++i) {
    const char c = record[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < record.size() && record[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes)
    throw ValidationError(path + ":" + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  CsvTable table;
  table.path = path;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && table.header.empty()) continue;
    auto fields = detail::split_record(line, path, line_no);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (line.empty()) continue;  // skip blank data lines
    if (fields.size() != table.header.size())
      throw ValidationError(path + ":" + std::to_string(line_no) + ": row has " +
                            std::to_string(fields.size()) + " fields, header has " +
                            std::to_string(table.header.size()));
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty())
    throw ValidationError(path + ": empty file, expected a CSV header row");
  return table;
}

// Locale-independent double parsing with error context. `row_index` is
// 0-based into table.rows; the reported line number accounts for the header.
inline double parse_double(const CsvTable& table, std::size_t row_index,
                           std::size_t column) {
  const std::string& cell = table.rows[row_index][column];
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ValidationError(table.path + ":" + std::to_string(row_index + 2) +
                          ": column '" + table.header[column] +
                          "': cannot parse '" + cell + "' as a number");
  return value;
}

inline bool parse_bool(const CsvTable& table, std::size_t row_index,
                       std::size_t column) {
  const std::string& cell = table.rows[row_index][column];
  if (cell == "1" || cell == "true" || cell == "True" || cell == "TRUE") return true;
  if (cell == "0" || cell == "false" || cell == "False" || cell == "FALSE") return false;
  throw ValidationError(table.path + ":" + std::to_string(row_index + 2) +
                        ": column '" + table.header[column] + "': cannot parse '" +
                        cell + "' as a boolean");
}

// Shortest round-trip decimal representation; '.' separator regardless of locale.
inline std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw InternalError("to_chars failed");
  return std::string(buf, ptr);
}

inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos)
    return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot write " + path);
  }

  void write_row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_escape(fields[i]);
    }
    out_ << '\n';
  }

  void close() {
    out_.close();
    if (!out_) throw IoError("error writing " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace selabel
