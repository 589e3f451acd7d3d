#pragma once

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace pinchflow::csv {

/// 17 significant digits round-trip every double.
inline std::string format(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Absent values are written as empty fields.
inline std::string format(const std::optional<double>& x) { return x ? format(*x) : std::string(); }

inline void write_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << fields[i];
  }
  os << '\n';
}

}  // namespace pinchflow::csv
