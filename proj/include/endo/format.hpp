#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace endo {

/// Shortest round-trip decimal form of v.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// As format_double, but NaN becomes an empty CSV field.
inline std::string format_field(double v) { return std::isnan(v) ? std::string() : format_double(v); }

} // namespace endo
