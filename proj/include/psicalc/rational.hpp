#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace psicalc {

using Rat = boost::multiprecision::cpp_rational;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A reciprocal (or matrix pivot) hit an exact zero.
class PoleError : public Error {
 public:
  explicit PoleError(const std::string& what) : Error(what) {}
};

/// Complex number with exact rational real and imaginary parts.
///
/// All constant folding in the expression engine goes through this type, so
/// rational expressions evaluate without rounding.
class RatC {
 public:
  RatC() = default;
  RatC(long v) : re_(v) {}  // NOLINT: implicit on purpose
  RatC(Rat re) : re_(std::move(re)) {}
  RatC(Rat re, Rat im) : re_(std::move(re)), im_(std::move(im)) {}

  static RatC i() { return RatC(Rat(0), Rat(1)); }

  const Rat& re() const { return re_; }
  const Rat& im() const { return im_; }

  bool is_zero() const { return re_ == 0 && im_ == 0; }
  bool is_one() const { return re_ == 1 && im_ == 0; }
  bool is_real() const { return im_ == 0; }
  /// True when the value is an integer (imaginary part zero).
  bool is_integer() const {
    return im_ == 0 && boost::multiprecision::denominator(re_) == 1;
  }
  long as_long() const {
    return static_cast<long>(boost::multiprecision::numerator(re_));
  }

  RatC operator-() const { return RatC(-re_, -im_); }

  friend RatC operator+(const RatC& a, const RatC& b) {
    return RatC(a.re_ + b.re_, a.im_ + b.im_);
  }
  friend RatC operator-(const RatC& a, const RatC& b) {
    return RatC(a.re_ - b.re_, a.im_ - b.im_);
  }
  friend RatC operator*(const RatC& a, const RatC& b) {
    return RatC(a.re_ * b.re_ - a.im_ * b.im_, a.re_ * b.im_ + a.im_ * b.re_);
  }
  friend RatC operator/(const RatC& a, const RatC& b) {
    Rat n = b.re_ * b.re_ + b.im_ * b.im_;
    if (n == 0) throw PoleError("division by exact zero");
    return RatC((a.re_ * b.re_ + a.im_ * b.im_) / n,
                (a.im_ * b.re_ - a.re_ * b.im_) / n);
  }

  RatC& operator+=(const RatC& b) { return *this = *this + b; }
  RatC& operator-=(const RatC& b) { return *this = *this - b; }
  RatC& operator*=(const RatC& b) { return *this = *this * b; }

  friend bool operator==(const RatC& a, const RatC& b) {
    return a.re_ == b.re_ && a.im_ == b.im_;
  }
  friend bool operator!=(const RatC& a, const RatC& b) { return !(a == b); }

  /// Lexicographic order (real part first); used only for canonical sorting.
  friend int compare(const RatC& a, const RatC& b) {
    if (a.re_ != b.re_) return a.re_ < b.re_ ? -1 : 1;
    if (a.im_ != b.im_) return a.im_ < b.im_ ? -1 : 1;
    return 0;
  }

  RatC pow_int(long n) const {
    if (n == 0) return RatC(1);
    if (n < 0) return RatC(1) / pow_int(-n);
    RatC base = *this, acc(1);
    long k = n;
    while (k > 0) {
      if (k & 1) acc *= base;
      base *= base;
      k >>= 1;
    }
    return acc;
  }

  std::complex<double> to_complex() const {
    return {static_cast<double>(re_), static_cast<double>(im_)};
  }

 private:
  Rat re_{0};
  Rat im_{0};
};

/// Exact conversion: every finite double is a dyadic rational.
inline Rat rat_from_double(double x) {
  if (!std::isfinite(x)) throw Error("non-finite value has no rational form");
  if (x == 0.0) return Rat(0);
  int exp = 0;
  double m = std::frexp(x, &exp);  // x = m * 2^exp, |m| in [0.5, 1)
  // 53 doublings make the mantissa integral.
  long long mant = static_cast<long long>(std::ldexp(m, 53));
  exp -= 53;
  Rat r(mant);
  boost::multiprecision::cpp_int two(1);
  if (exp >= 0) {
    r *= Rat(boost::multiprecision::cpp_int(1) << exp);
  } else {
    r /= Rat(boost::multiprecision::cpp_int(1) << (-exp));
  }
  return r;
}

inline RatC ratc_from_complex(std::complex<double> z) {
  return RatC(rat_from_double(z.real()), rat_from_double(z.imag()));
}

}  // namespace psicalc
