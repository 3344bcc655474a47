#pragma once

#include <optional>
#include <vector>

#include "residual/rational.hpp"

namespace residual {

// Axis-aligned half-open box [lo, hi) with exact rational corners.
struct Box {
  RationalVector lo;
  RationalVector hi;

  Eigen::Index dim() const { return lo.size(); }

  bool empty() const {
    for (Eigen::Index i = 0; i < dim(); ++i)
      if (lo[i] >= hi[i]) return true;
    return false;
  }

  Rational volume() const {
    if (empty()) return Rational(0);
    Rational v(1);
    for (Eigen::Index i = 0; i < dim(); ++i) v *= hi[i] - lo[i];
    return v;
  }

  bool contains(const RationalVector& x) const {
    for (Eigen::Index i = 0; i < dim(); ++i)
      if (x[i] < lo[i] || x[i] >= hi[i]) return false;
    return true;
  }
};

std::optional<Box> intersect(const Box& a, const Box& b);

// Decomposes the bounding region into elementary cells induced by all box
// faces and reports, per elementary cell, how many input boxes cover it.
// Exact; used for partition/coverage audits where inclusion-exclusion would
// be unwieldy.
struct CoverageCell {
  Box cell;
  int multiplicity = 0;
};

std::vector<CoverageCell> coverage_cells(const Box& region, const std::vector<Box>& boxes);

// Same decomposition, but each covering box contributes its weight; returns
// per-cell totals. Used for the pushforward-density audit.
std::vector<std::pair<Box, Rational>> weighted_cells(const Box& region,
                                                     const std::vector<Box>& boxes,
                                                     const std::vector<Rational>& weights);

}  // namespace residual
