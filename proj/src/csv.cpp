#include "localsgd/csv.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "localsgd/errors.hpp"

namespace localsgd {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void CsvTable::add_row(std::initializer_list<CsvField> fields) {
  add_row(std::vector<CsvField>(fields));
}

void CsvTable::add_row(const std::vector<CsvField>& fields) {
  if (fields.size() != header_.size())
    throw InvalidParameter("csv row has " + std::to_string(fields.size()) + " fields, header has " +
                           std::to_string(header_.size()));
  std::vector<std::string> row;
  row.reserve(fields.size());
  for (const auto& f : fields) {
    if (f.text().find_first_of(",\n\"") != std::string::npos)
      throw InvalidParameter("csv field contains a separator: " + f.text());
    row.push_back(f.text());
  }
  rows_.push_back(std::move(row));
}

void CsvTable::write(std::ostream& os) const {
  auto line = [&os](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << ',';
      os << cells[i];
    }
    os << '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
}

std::string CsvTable::str() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

}  // namespace localsgd
