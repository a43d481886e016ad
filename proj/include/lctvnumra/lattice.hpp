#pragma once

// The translation set {0, r/N} + 2Z and the chirp attached to each translate.
//
// Lattice coordinates are kept exact. Every point of the set, every difference
// of two points and every 2N-multiple of a point is an integer multiple of
// 1/N, so positions are stored as integer "ticks" with value = ticks / N.

#include <algorithm>
#include <complex>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "lctvnumra/error.hpp"
#include "lctvnumra/lct.hpp"

namespace lctvnumra {

/// Normalised rational num/den with den > 0.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d = 1) : num(n), den(d) {
    if (den == 0) throw Error(ErrorCode::InvalidArgument, "zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const std::int64_t g = std::gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return {a.num * b.den + b.num * a.den, a.den * b.den};
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return {a.num * b.den - b.num * a.den, a.den * b.den};
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return {a.num * b.num, a.den * b.den};
  }
  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend auto operator<=>(const Rational& a, const Rational& b) {
    return a.num * b.den <=> b.num * a.den;
  }
  friend std::ostream& operator<<(std::ostream& os, const Rational& q) {
    os << q.num;
    if (q.den != 1) os << '/' << q.den;
    return os;
  }
  std::string str() const {
    return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
  }
};

enum class Coset { zero, r_over_N };

struct LatticePoint {
  Coset base = Coset::zero;
  std::int64_t translate = 0;
  Rational value;

  friend bool operator==(const LatticePoint& a, const LatticePoint& b) {
    return a.base == b.base && a.translate == b.translate;
  }
};

class Lattice {
 public:
  static Lattice make(std::int64_t N, std::int64_t r) {
    if (N < 1) throw Error(ErrorCode::NonPositiveN, "N must be >= 1");
    if (r % 2 == 0) throw Error(ErrorCode::EvenR, "r must be odd");
    if (r < 1 || r > 2 * N - 1) throw Error(ErrorCode::ROutOfRange, "need 1 <= r <= 2N-1");
    if (std::gcd(r, N) != 1) throw Error(ErrorCode::NotCoprime, "r and N must be coprime");
    return Lattice(N, r);
  }

  std::int64_t N() const { return n_; }
  std::int64_t r() const { return r_; }
  /// Dilation factor 2N.
  std::int64_t q() const { return 2 * n_; }

  // --- tick arithmetic (value = ticks / N) ---
  std::int64_t period_ticks() const { return 2 * n_; }

  bool contains_ticks(std::int64_t ticks) const {
    const std::int64_t m = mod(ticks, 2 * n_);
    return m == 0 || m == r_;
  }
  bool contains(const Rational& v) const {
    if (n_ % v.den != 0) return false;
    return contains_ticks(v.num * (n_ / v.den));
  }
  std::int64_t ticks_of(const Rational& v) const {
    if (n_ % v.den != 0) throw Error(ErrorCode::LatticeMismatch, "value not in (1/N)Z: " + v.str());
    return v.num * (n_ / v.den);
  }
  Rational value_of(std::int64_t ticks) const { return Rational(ticks, n_); }
  double to_double(std::int64_t ticks) const {
    return static_cast<double>(ticks) / static_cast<double>(n_);
  }

  LatticePoint point(Coset base, std::int64_t translate) const {
    const std::int64_t ticks = (base == Coset::zero ? 0 : r_) + 2 * n_ * translate;
    return LatticePoint{base, translate, value_of(ticks)};
  }
  LatticePoint point_from_ticks(std::int64_t ticks) const {
    if (!contains_ticks(ticks))
      throw Error(ErrorCode::LatticeMismatch, "not a lattice point: " + value_of(ticks).str());
    const std::int64_t m = mod(ticks, 2 * n_);
    const Coset base = m == 0 ? Coset::zero : Coset::r_over_N;
    return LatticePoint{base, (ticks - m) / (2 * n_), value_of(ticks)};
  }
  std::int64_t ticks_of(const LatticePoint& p) const {
    return (p.base == Coset::zero ? 0 : r_) + 2 * n_ * p.translate;
  }

  bool operator==(const Lattice&) const = default;

  static std::int64_t mod(std::int64_t a, std::int64_t m) {
    const std::int64_t x = a % m;
    return x < 0 ? x + m : x;
  }
  static std::int64_t floor_div(std::int64_t a, std::int64_t m) {
    return (a - mod(a, m)) / m;
  }

 private:
  Lattice(std::int64_t N, std::int64_t r) : n_(N), r_(r) {}
  std::int64_t n_;
  std::int64_t r_;
};

inline Lattice validate_lattice(std::int64_t N, std::int64_t r) { return Lattice::make(N, r); }

/// All points {2k, r/N + 2k : lo <= k <= hi}, ascending by value.
inline std::vector<LatticePoint> enumerate_lambda(const Lattice& lat, std::int64_t lo,
                                                  std::int64_t hi) {
  if (lo > hi) throw Error(ErrorCode::InvalidArgument, "enumerate_lambda needs lo <= hi");
  std::vector<LatticePoint> out;
  out.reserve(static_cast<std::size_t>(2 * (hi - lo + 1)));
  for (std::int64_t k = lo; k <= hi; ++k) {
    out.push_back(lat.point(Coset::zero, k));
    out.push_back(lat.point(Coset::r_over_N, k));
  }
  // r/N < 2, so the interleaved order is already ascending.
  return out;
}

/// exp(-i*pi*(A/B)*(t^2 - lambda^2)); unit modulus.
inline cd chirp_factor(double t, double lambda, const LctParams& p) {
  return std::polar(1.0, -kPi * (p.A() / p.B()) * (t * t - lambda * lambda));
}
inline cd chirp_factor(double t, const Rational& lambda, const LctParams& p) {
  return chirp_factor(t, lambda.to_double(), p);
}

/// The t-independent ratio chirp(t, from) / chirp(t, to) = exp(i*pi*(A/B)*(from^2 - to^2)).
inline cd chirp_ratio(const Rational& from, const Rational& to, const LctParams& p) {
  const Rational diff = from * from - to * to;
  return std::polar(1.0, kPi * (p.A() / p.B()) * diff.to_double());
}

}  // namespace lctvnumra
