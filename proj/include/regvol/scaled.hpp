#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace regvol {

// Nonnegative-friendly floating value with an explicit power-of-two exponent,
// value = frac * 2^exp2 with |frac| in [0.5, 1). Subset-sum tables mix terms
// like z^S * E_l(...) whose magnitudes overflow doubles long before the
// ratios of interest degrade, so the table machinery works in this
// representation throughout.
struct ScaledReal {
  double frac = 0.0;
  std::int64_t exp2 = 0;

  static ScaledReal zero() { return {}; }
  static ScaledReal one() { return from(1.0); }

  static ScaledReal from(double v) {
    ScaledReal s;
    if (v == 0.0) return s;
    int e = 0;
    s.frac = std::frexp(v, &e);
    s.exp2 = e;
    return s;
  }

  // exp(ln) without ever materialising the value
  static ScaledReal from_log(double ln) {
    if (ln == -std::numeric_limits<double>::infinity()) return zero();
    const double e = std::floor(ln / M_LN2);
    ScaledReal s = from(std::exp(ln - e * M_LN2));
    s.exp2 += static_cast<std::int64_t>(e);
    return s;
  }

  bool is_zero() const { return frac == 0.0; }

  void normalize() {
    if (frac == 0.0) {
      exp2 = 0;
      return;
    }
    int e = 0;
    frac = std::frexp(frac, &e);
    exp2 += e;
  }

  double log() const {
    if (is_zero() || frac < 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(frac) + static_cast<double>(exp2) * M_LN2;
  }

  // may overflow to +-inf or underflow to 0 for extreme exponents
  double to_double() const {
    if (is_zero()) return 0.0;
    if (exp2 > 2000) return frac > 0 ? std::numeric_limits<double>::infinity()
                                     : -std::numeric_limits<double>::infinity();
    if (exp2 < -2000) return 0.0;
    return std::ldexp(frac, static_cast<int>(exp2));
  }

  friend ScaledReal operator*(ScaledReal a, ScaledReal b) {
    if (a.is_zero() || b.is_zero()) return zero();
    ScaledReal r;
    r.frac = a.frac * b.frac;
    r.exp2 = a.exp2 + b.exp2;
    r.normalize();
    return r;
  }

  friend ScaledReal operator*(ScaledReal a, double c) { return a * from(c); }

  friend ScaledReal operator+(ScaledReal a, ScaledReal b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    if (a.exp2 < b.exp2) std::swap(a, b);
    const std::int64_t de = b.exp2 - a.exp2;  // <= 0
    if (de < -120) return a;
    ScaledReal r;
    r.frac = a.frac + std::ldexp(b.frac, static_cast<int>(de));
    r.exp2 = a.exp2;
    r.normalize();
    return r;
  }

  ScaledReal& operator+=(const ScaledReal& b) {
    *this = *this + b;
    return *this;
  }

  ScaledReal& operator*=(const ScaledReal& b) {
    *this = *this * b;
    return *this;
  }

  // comparison of magnitudes assuming both nonnegative
  bool less_than(const ScaledReal& b) const {
    if (is_zero()) return !b.is_zero();
    if (b.is_zero()) return false;
    if (exp2 != b.exp2) return exp2 < b.exp2;
    return frac < b.frac;
  }
};

// Coefficients of prod_i (1 + t * vals[i]) up to degree jmax. For vals >= 0
// every update adds nonnegative terms, so the recurrence is cancellation-free.
inline std::vector<ScaledReal> poly_from_roots_scaled(const double* vals, int count, int jmax) {
  std::vector<ScaledReal> e(static_cast<std::size_t>(jmax) + 1, ScaledReal::zero());
  e[0] = ScaledReal::one();
  int reached = 0;
  for (int m = 0; m < count; ++m) {
    const ScaledReal v = ScaledReal::from(vals[m]);
    reached = std::min(reached + 1, jmax);
    for (int j = reached; j >= 1; --j) e[j] += e[j - 1] * v;
  }
  return e;
}

// log(C(n, k)) via lgamma
inline double log_binomial(double n, double k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// exact for small arguments, used for expansion coefficients C(d-h, l-h)
inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

}  // namespace regvol
