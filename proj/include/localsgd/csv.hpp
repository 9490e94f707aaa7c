#pragma once

#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace localsgd {

/// Shortest round-trip text is not stable across libraries, so every float
/// goes out with 17 significant digits, '.' separator, no locale.
std::string format_double(double v);

/// One CSV cell. Numbers are formatted at construction.
class CsvField {
 public:
  CsvField(double v) : text_(format_double(v)) {}
  CsvField(int v) : text_(std::to_string(v)) {}
  CsvField(long v) : text_(std::to_string(v)) {}
  CsvField(long long v) : text_(std::to_string(v)) {}
  CsvField(unsigned v) : text_(std::to_string(v)) {}
  CsvField(unsigned long v) : text_(std::to_string(v)) {}
  CsvField(unsigned long long v) : text_(std::to_string(v)) {}
  CsvField(bool v) : text_(v ? "true" : "false") {}
  CsvField(const char* s) : text_(s) {}
  CsvField(std::string s) : text_(std::move(s)) {}
  CsvField(std::string_view s) : text_(s) {}

  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

/// In-memory CSV table with a fixed header.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::initializer_list<CsvField> fields);
  void add_row(const std::vector<CsvField>& fields);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }

  std::string str() const;
  void write(std::ostream& os) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace localsgd
