#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/eigen.hpp>

#include <Eigen/Core>

namespace residual {

// Exact rational scalar used wherever binary floating point would destroy
// the dynamics (long noiseless orbits, map validation, jump laws).
using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

using RationalVector = Eigen::Matrix<Rational, Eigen::Dynamic, 1>;
using RationalMatrix = Eigen::Matrix<Rational, Eigen::Dynamic, Eigen::Dynamic>;

inline double to_double(const Rational& q) { return q.convert_to<double>(); }

inline Eigen::VectorXd to_double(const RationalVector& v) {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = to_double(v[i]);
  return out;
}

// Every finite double is an exact rational; this conversion is lossless.
inline Rational rational_from_double(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("rational_from_double: non-finite input");
  return Rational(x);
}

inline BigInt floor_rational(const Rational& q) {
  BigInt num = numerator(q);
  BigInt den = denominator(q);  // cpp_rational keeps den > 0
  BigInt quo = num / den;       // truncates toward zero
  if (num < 0 && quo * den != num) --quo;
  return quo;
}

// Bits needed to represent the denominator; used as the orbit growth budget.
inline std::size_t denominator_bits(const Rational& q) {
  return msb(denominator(q)) + 1;
}

// Accepts "p/q", plain integers, and decimal literals like "0.25" (parsed
// exactly as 25/100).
Rational parse_rational(const std::string& text);

std::string format_rational(const Rational& q);

}  // namespace residual
