#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include <Eigen/Core>

#include "residual/rational.hpp"

namespace residual {

using Vector = Eigen::VectorXd;
using LatticeVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

// Unique k in Z with x in [k, k+1). Half-open convention throughout: the
// fractional part must land in [0, 1) even when rounding pushes x - floor(x)
// onto the upper face (e.g. x = -1e-300), so the sub-ulp wrap below snaps the
// pair (k, frac) back to (k+1, 0).
inline std::int64_t floor_coord(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("floor_coord: non-finite coordinate");
  if (std::abs(x) >= 9.0e18) throw std::invalid_argument("floor_coord: coordinate exceeds lattice range");
  double f = std::floor(x);
  auto k = static_cast<std::int64_t>(f);
  if (x - static_cast<double>(k) >= 1.0) ++k;
  return k;
}

inline double fract_coord(double x) {
  const std::int64_t k = floor_coord(x);
  double f = x - static_cast<double>(k);
  if (f < 0.0) f = 0.0;  // only reachable in the sub-ulp wrap case
  return f;
}

inline LatticeVector floor_lattice(const Vector& x) {
  LatticeVector k(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) k[i] = floor_coord(x[i]);
  return k;
}

inline Vector project_torus(const Vector& x) {
  Vector f(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) f[i] = fract_coord(x[i]);
  return f;
}

// Exact counterparts on rationals.
inline BigInt floor_coord(const Rational& x) { return floor_rational(x); }

inline LatticeVector floor_lattice(const RationalVector& x) {
  LatticeVector k(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    BigInt f = floor_rational(x[i]);
    if (f > std::numeric_limits<std::int64_t>::max() || f < std::numeric_limits<std::int64_t>::min())
      throw std::overflow_error("floor_lattice: cube index exceeds 64-bit range");
    k[i] = f.convert_to<std::int64_t>();
  }
  return k;
}

inline RationalVector project_torus(const RationalVector& x) {
  RationalVector f(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) f[i] = x[i] - Rational(floor_rational(x[i]));
  return f;
}

}  // namespace residual
