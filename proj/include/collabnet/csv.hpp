#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace collabnet {

/// Six significant digits in fixed notation ("0.0250000", "2.29500",
/// "1234.57"). Integers wider than six digits keep every digit.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0.00000";
  const int magnitude = static_cast<int>(std::floor(std::log10(std::abs(v))));
  int decimals = std::max(0, 5 - magnitude);
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  // rounding can carry into a new leading digit (9.999996 -> 10.00000)
  if (decimals > 0 && std::abs(std::strtod(buf, nullptr)) >= std::pow(10.0, magnitude + 1)) {
    std::snprintf(buf, sizeof buf, "%.*f", decimals - 1, v);
  }
  std::string out(buf);
  if (out.find_first_not_of("-0.") == std::string::npos) out = "0.00000";
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Header row, then data rows; line-feed terminated.
inline void emit_csv(const CsvTable& table, std::ostream& out) {
  auto write_row = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << csv_escape(row[i]);
    }
    out << '\n';
  };
  write_row(table.header);
  for (const auto& r : table.rows) write_row(r);
  out.flush();
  if (!out) throw std::runtime_error("failed writing CSV output");
}

/// Reads a CSV written by emit_csv (quoted fields supported, no embedded
/// newlines).
inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          cur += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    fields.push_back(cur);
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      table.rows.push_back(std::move(fields));
    }
  }
  return table;
}

}  // namespace collabnet
