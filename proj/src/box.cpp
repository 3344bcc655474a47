#include "residual/box.hpp"

#include <algorithm>

namespace residual {

std::optional<Box> intersect(const Box& a, const Box& b) {
  Box out;
  out.lo.resize(a.dim());
  out.hi.resize(a.dim());
  for (Eigen::Index i = 0; i < a.dim(); ++i) {
    out.lo[i] = std::max(a.lo[i], b.lo[i]);
    out.hi[i] = std::min(a.hi[i], b.hi[i]);
    if (out.lo[i] >= out.hi[i]) return std::nullopt;
  }
  return out;
}

namespace {

std::vector<std::vector<Rational>> axis_breakpoints(const Box& region,
                                                    const std::vector<Box>& boxes) {
  const Eigen::Index d = region.dim();
  std::vector<std::vector<Rational>> breaks(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    auto& bs = breaks[static_cast<std::size_t>(i)];
    bs.push_back(region.lo[i]);
    bs.push_back(region.hi[i]);
    for (const Box& b : boxes) {
      for (const Rational& c : {b.lo[i], b.hi[i]})
        if (c > region.lo[i] && c < region.hi[i]) bs.push_back(c);
    }
    std::sort(bs.begin(), bs.end());
    bs.erase(std::unique(bs.begin(), bs.end()), bs.end());
  }
  return breaks;
}

template <typename Visit>
void for_each_elementary_cell(const std::vector<std::vector<Rational>>& breaks, Eigen::Index d,
                              Visit&& visit) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
  while (true) {
    Box cell;
    cell.lo.resize(d);
    cell.hi.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto& bs = breaks[static_cast<std::size_t>(i)];
      cell.lo[i] = bs[idx[static_cast<std::size_t>(i)]];
      cell.hi[i] = bs[idx[static_cast<std::size_t>(i)] + 1];
    }
    visit(cell);

    Eigen::Index axis = 0;
    for (; axis < d; ++axis) {
      auto a = static_cast<std::size_t>(axis);
      if (++idx[a] + 1 < breaks[a].size()) break;
      idx[a] = 0;
    }
    if (axis == d) break;
  }
}

bool cell_inside(const Box& cell, const Box& b, Eigen::Index d) {
  for (Eigen::Index i = 0; i < d; ++i)
    if (b.lo[i] > cell.lo[i] || cell.hi[i] > b.hi[i]) return false;
  return true;
}

}  // namespace

std::vector<CoverageCell> coverage_cells(const Box& region, const std::vector<Box>& boxes) {
  const Eigen::Index d = region.dim();

  const auto breaks = axis_breakpoints(region, boxes);
  std::vector<CoverageCell> cells;
  for_each_elementary_cell(breaks, d, [&](const Box& cell) {
    int mult = 0;
    for (const Box& b : boxes)
      if (cell_inside(cell, b, d)) ++mult;
    cells.push_back({cell, mult});
  });
  return cells;
}

std::vector<std::pair<Box, Rational>> weighted_cells(const Box& region,
                                                     const std::vector<Box>& boxes,
                                                     const std::vector<Rational>& weights) {
  const Eigen::Index d = region.dim();
  const auto breaks = axis_breakpoints(region, boxes);
  std::vector<std::pair<Box, Rational>> cells;
  for_each_elementary_cell(breaks, d, [&](const Box& cell) {
    Rational total(0);
    for (std::size_t b = 0; b < boxes.size(); ++b)
      if (cell_inside(cell, boxes[b], d)) total += weights[b];
    cells.emplace_back(cell, total);
  });
  return cells;
}

}  // namespace residual
