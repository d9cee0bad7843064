#pragma once

#include <cstdio>
#include <ostream>
#include <string>

#include "wonham/experiments.hpp"

namespace wonham {

/// Shortest round-trip decimal form of a double (printf %.17g).
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// "# <comment>" line followed by "t,estimate,std_error" rows, LF endings.
inline void write_curve_csv(std::ostream& os, const Curve& c, const std::string& comment) {
  if (!comment.empty()) os << "# " << comment << '\n';
  os << "t,estimate,std_error\n";
  for (std::size_t i = 0; i < c.times.size(); ++i)
    os << format_double(c.times[i]) << ',' << format_double(c.values[i]) << ',' << format_double(c.std_errors[i])
       << '\n';
}

}  // namespace wonham
