#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace ctree {

// log(0). Cells holding this value are structurally unreachable.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline bool is_log_zero(double x) { return x == kLogZero; }

// log(exp(a) + exp(b)), ignoring log-zero operands.
inline double log_add(double a, double b) {
  if (is_log_zero(a)) return b;
  if (is_log_zero(b)) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// log(sum_i exp(xs[i])); an empty or all-log-zero input yields kLogZero.
inline double log_sum_exp(std::span<const double> xs) {
  double hi = kLogZero;
  for (double x : xs) hi = std::max(hi, x);
  if (is_log_zero(hi)) return kLogZero;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

// log(1 - exp(x)) for x <= 0, accurate near both ends.
inline double log1m_exp(double x) {
  if (x >= 0.0) return kLogZero;
  if (x > -0.6931471805599453) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

}  // namespace ctree
