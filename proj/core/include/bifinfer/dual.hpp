#pragma once

// Nestable forward-mode perturbation arithmetic.
//
// Dual<T> carries a value and a single directional derivative. Nesting
// (Dual<Dual<double>>, ...) yields mixed higher-order directional derivatives,
// each level owning its own infinitesimal.

#include <cmath>
#include <concepts>
#include <type_traits>

namespace bifinfer {

template <class T>
struct Dual {
  T v{};
  T d{};

  constexpr Dual() = default;
  constexpr Dual(const T& value) : v(value), d(0.0) {}  // NOLINT(implicit)
  constexpr Dual(const T& value, const T& deriv) : v(value), d(deriv) {}

  template <std::floating_point F>
    requires(!std::is_same_v<T, double>)
  constexpr Dual(F value) : v(value), d(0.0) {}  // NOLINT(implicit)

  friend constexpr Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
  friend constexpr Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
  friend constexpr Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
  friend constexpr Dual operator/(const Dual& a, const Dual& b) {
    T q = a.v / b.v;
    return {q, (a.d - q * b.d) / b.v};
  }
  friend constexpr Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
  friend constexpr Dual operator+(const Dual& a) { return a; }

  friend constexpr Dual operator+(const Dual& a, double b) { return {a.v + b, a.d}; }
  friend constexpr Dual operator+(double a, const Dual& b) { return {a + b.v, b.d}; }
  friend constexpr Dual operator-(const Dual& a, double b) { return {a.v - b, a.d}; }
  friend constexpr Dual operator-(double a, const Dual& b) { return {a - b.v, -b.d}; }
  friend constexpr Dual operator*(const Dual& a, double b) { return {a.v * b, a.d * b}; }
  friend constexpr Dual operator*(double a, const Dual& b) { return {a * b.v, a * b.d}; }
  friend constexpr Dual operator/(const Dual& a, double b) { return {a.v / b, a.d / b}; }
  friend constexpr Dual operator/(double a, const Dual& b) {
    T q = a / b.v;
    return {q, -q * b.d / b.v};
  }

  constexpr Dual& operator+=(const Dual& b) { return *this = *this + b; }
  constexpr Dual& operator-=(const Dual& b) { return *this = *this - b; }
  constexpr Dual& operator*=(const Dual& b) { return *this = *this * b; }
  constexpr Dual& operator/=(const Dual& b) { return *this = *this / b; }
};

using D1 = Dual<double>;
using D2 = Dual<D1>;
using D3 = Dual<D2>;

template <class T>
struct is_dual : std::false_type {};
template <class T>
struct is_dual<Dual<T>> : std::true_type {};

/// Innermost real value of a (possibly nested) dual.
constexpr double value_of(double x) { return x; }
template <class T>
constexpr double value_of(const Dual<T>& x) {
  return value_of(x.v);
}

/// True when every component, perturbations included, is zero.
constexpr bool exactly_zero(double x) { return x == 0.0; }
template <class T>
constexpr bool exactly_zero(const Dual<T>& x) {
  return exactly_zero(x.v) && exactly_zero(x.d);
}

// Comparisons look at the real value only; they decide branches, never derivatives.
template <class T>
constexpr bool operator<(const Dual<T>& a, const Dual<T>& b) { return value_of(a) < value_of(b); }
template <class T>
constexpr bool operator>(const Dual<T>& a, const Dual<T>& b) { return value_of(a) > value_of(b); }
template <class T>
constexpr bool operator<(const Dual<T>& a, double b) { return value_of(a) < b; }
template <class T>
constexpr bool operator>(const Dual<T>& a, double b) { return value_of(a) > b; }

template <class T>
Dual<T> sin(const Dual<T>& x) {
  using std::cos;
  using std::sin;
  return {sin(x.v), x.d * cos(x.v)};
}

template <class T>
Dual<T> cos(const Dual<T>& x) {
  using std::cos;
  using std::sin;
  return {cos(x.v), -(x.d * sin(x.v))};
}

template <class T>
Dual<T> exp(const Dual<T>& x) {
  using std::exp;
  T e = exp(x.v);
  return {e, x.d * e};
}

template <class T>
Dual<T> log(const Dual<T>& x) {
  using std::log;
  return {log(x.v), x.d / x.v};
}

template <class T>
Dual<T> sqrt(const Dual<T>& x) {
  using std::sqrt;
  T r = sqrt(x.v);
  return {r, x.d / (2.0 * r)};
}

/// |x| with the derivative sign taken from the real value; sign(0) = 0.
template <class T>
Dual<T> abs(const Dual<T>& x) {
  double s = value_of(x) > 0.0 ? 1.0 : (value_of(x) < 0.0 ? -1.0 : 0.0);
  return x * s;
}

template <class T>
Dual<T> pow(const Dual<T>& x, int n) {
  if (n == 0) return Dual<T>(1.0);
  Dual<T> r = x;
  for (int i = 1; i < n; ++i) r = r * x;
  return r;
}

template <class T>
T square(const T& x) {
  return x * x;
}

/// Seed a scalar of type S with value x and unit derivative at the outermost level.
template <class S>
Dual<S> seed(const S& x, const S& dx) {
  return Dual<S>(x, dx);
}

}  // namespace bifinfer
