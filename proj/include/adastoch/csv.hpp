#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>

namespace adastoch::csv {

// Round-trippable scientific notation; the same bytes on every run.
inline std::string real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17e", x);
  return buf;
}

inline std::string integer(std::int64_t x) { return std::to_string(x); }

inline std::string optional_integer(const std::optional<std::size_t>& x) {
  return x ? std::to_string(*x) : std::string{};
}

}  // namespace adastoch::csv
