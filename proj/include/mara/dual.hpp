#pragma once

// Forward-mode dual numbers. Nesting (Dual<Dual<double>>) gives mixed second
// derivatives; the trainer relies on this for force-matching gradients.

#include <cmath>
#include <type_traits>

namespace mara {

template <class T>
struct Dual {
  T v{};
  T d{};

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value), d(0.0) {}  // NOLINT: implicit lift of constants
  constexpr Dual(T value, T tangent) : v(value), d(tangent) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    d = d * o.v + v * o.d;
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    *this = *this / o;
    return *this;
  }
  Dual& operator*=(double s) {
    v *= s;
    d *= s;
    return *this;
  }

  friend Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
  friend Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
  friend Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
  friend Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
  friend Dual operator/(const Dual& a, const Dual& b) {
    T inv = T(1.0) / b.v;
    T q = a.v * inv;
    return {q, (a.d - q * b.d) * inv};
  }
  friend Dual operator+(const Dual& a, double s) { return {a.v + s, a.d}; }
  friend Dual operator+(double s, const Dual& a) { return {a.v + s, a.d}; }
  friend Dual operator-(const Dual& a, double s) { return {a.v - s, a.d}; }
  friend Dual operator-(double s, const Dual& a) { return {s - a.v, -a.d}; }
  friend Dual operator*(const Dual& a, double s) { return {a.v * s, a.d * s}; }
  friend Dual operator*(double s, const Dual& a) { return {a.v * s, a.d * s}; }
  friend Dual operator/(const Dual& a, double s) { return {a.v / s, a.d / s}; }
  friend Dual operator/(double s, const Dual& a) { return Dual(s) / a; }
};

template <class T>
struct is_dual : std::false_type {};
template <class T>
struct is_dual<Dual<T>> : std::true_type {};

inline double value_of(double x) { return x; }
template <class T>
double value_of(const Dual<T>& x) {
  return value_of(x.v);
}

inline bool is_finite(double x) { return std::isfinite(x); }
template <class T>
bool is_finite(const Dual<T>& x) {
  return is_finite(x.v) && is_finite(x.d);
}

template <class T>
Dual<T> exp(const Dual<T>& a) {
  using std::exp;
  T e = exp(a.v);
  return {e, e * a.d};
}
template <class T>
Dual<T> log(const Dual<T>& a) {
  using std::log;
  return {log(a.v), a.d / a.v};
}
template <class T>
Dual<T> sin(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return {sin(a.v), cos(a.v) * a.d};
}
template <class T>
Dual<T> cos(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return {cos(a.v), -(sin(a.v) * a.d)};
}
template <class T>
Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  T s = sqrt(a.v);
  return {s, a.d / (s * 2.0)};
}

}  // namespace mara
