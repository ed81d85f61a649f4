#pragma once

#include <algorithm>
#include <cmath>

// Shared numeric comparisons for the test suites.

inline bool near_abs(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline bool near_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}
