#pragma once

#include <cstdio>
#include <string>

namespace tomo {

// Shortest round-trippable decimal form; used for every number we emit so
// repeated runs are byte-identical.
inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace tomo
