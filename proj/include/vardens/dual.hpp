#pragma once

#include <array>
#include <cmath>
#include <limits>

namespace vardens {

/// Forward-mode dual number in N independent variables carrying the value,
/// the gradient and the unmixed second partials d2/dv_i^2. Mixed second
/// partials are not tracked, which is enough for Laplacians.
template <int N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};
  std::array<double, N> dd{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: constants promote implicitly

  static Dual variable(double value, int index) {
    Dual r(value);
    r.d[index] = 1.0;
    return r;
  }

  Dual& operator+=(const Dual& b) { return *this = *this + b; }
  Dual& operator-=(const Dual& b) { return *this = *this - b; }
  Dual& operator*=(const Dual& b) { return *this = *this * b; }

  friend Dual operator+(const Dual& a, const Dual& b) {
    Dual r(a.v + b.v);
    for (int i = 0; i < N; ++i) {
      r.d[i] = a.d[i] + b.d[i];
      r.dd[i] = a.dd[i] + b.dd[i];
    }
    return r;
  }
  friend Dual operator-(const Dual& a, const Dual& b) {
    Dual r(a.v - b.v);
    for (int i = 0; i < N; ++i) {
      r.d[i] = a.d[i] - b.d[i];
      r.dd[i] = a.dd[i] - b.dd[i];
    }
    return r;
  }
  friend Dual operator-(const Dual& a) { return Dual(0.0) - a; }
  friend Dual operator*(const Dual& a, const Dual& b) {
    Dual r(a.v * b.v);
    for (int i = 0; i < N; ++i) {
      r.d[i] = a.d[i] * b.v + a.v * b.d[i];
      r.dd[i] = a.dd[i] * b.v + 2.0 * a.d[i] * b.d[i] + a.v * b.dd[i];
    }
    return r;
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    return a * chain(b, 1.0 / b.v, -1.0 / (b.v * b.v), 2.0 / (b.v * b.v * b.v));
  }

  /// f(a) from f(a.v), f'(a.v), f''(a.v).
  friend Dual chain(const Dual& a, double f0, double f1, double f2) {
    Dual r(f0);
    for (int i = 0; i < N; ++i) {
      r.d[i] = f1 * a.d[i];
      // Skipping f2 for inactive variables keeps an infinite f2 from
      // turning into NaN.
      r.dd[i] = (a.d[i] != 0.0 ? f2 * a.d[i] * a.d[i] : 0.0) + f1 * a.dd[i];
    }
    return r;
  }

  friend Dual sin(const Dual& a) {
    const double s = std::sin(a.v);
    return chain(a, s, std::cos(a.v), -s);
  }
  friend Dual cos(const Dual& a) {
    const double c = std::cos(a.v);
    return chain(a, c, -std::sin(a.v), -c);
  }
};

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) {
  return x.v;
}

/// |s|^c for c > 1. At s = 0 the derivatives take their right limits:
/// f' = 0 and f'' = +inf when c < 2.
inline double pow_abs(double s, double c) { return std::pow(std::abs(s), c); }

template <int N>
Dual<N> pow_abs(const Dual<N>& a, double c) {
  const double s = std::abs(a.v);
  const double sign = a.v < 0.0 ? -1.0 : 1.0;
  const double f0 = std::pow(s, c);
  const double f1 = c * std::pow(s, c - 1.0) * sign;
  const double f2 = s == 0.0 && c < 2.0 ? std::numeric_limits<double>::infinity()
                                        : c * (c - 1.0) * std::pow(s, c - 2.0);
  return chain(a, f0, f1, f2);
}

}  // namespace vardens
