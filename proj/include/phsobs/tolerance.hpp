#pragma once

#include <cstdlib>
#include <string>

namespace phsobs {

// Default tolerance for invariant checks. Overridable through the
// PHS_OBSERVE_TOL environment variable; values that fail to parse or are
// non-positive fall back to the built-in default.
inline double parse_tolerance_env(const char* text, double fallback) {
  if (!text) return fallback;
  char* end = nullptr;
  double v = std::strtod(text, &end);
  if (end == text || !(v > 0.0)) return fallback;
  return v;
}

inline double default_tolerance() {
  static const double tol =
      parse_tolerance_env(std::getenv("PHS_OBSERVE_TOL"), 1e-9);
  return tol;
}

}  // namespace phsobs
