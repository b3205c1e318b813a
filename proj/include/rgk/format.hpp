#pragma once

#include <cstdio>
#include <string>

namespace rgk {

// Fixed float rendering used by every text output: 9 significant digits.
inline std::string format_sig9(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

}  // namespace rgk
