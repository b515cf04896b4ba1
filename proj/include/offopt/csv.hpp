#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "offopt/error.hpp"

namespace offopt {

/// Fixed 6-decimal rendering used by every CSV this tool writes.
inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

/// Strict cell parse: the whole cell must be one finite number.
/// `where` names the row and column for the error message.
inline double parse_csv_double(const std::string& cell, const std::string& where) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || cell.empty())
    throw ParseError(where + ": not a number: \"" + cell + "\"");
  return value;
}

inline std::int64_t parse_csv_int(const std::string& cell, const std::string& where) {
  std::int64_t value = 0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || cell.empty())
    throw ParseError(where + ": not an integer: \"" + cell + "\"");
  return value;
}

}  // namespace offopt
