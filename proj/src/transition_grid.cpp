#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "residual/estimators.hpp"
#include "residual/stats.hpp"

namespace residual {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310005024;

// Antiderivative of the standard normal CDF: Psi(z) = z Phi(z) + phi(z).
double psi_int(double z) { return z * normal_cdf(z) + std::exp(-0.5 * z * z) / kSqrt2Pi; }

// F(t) = mass of the (uniform on [c1,c2)) * N(0,eps^2) convolution below t.
double segment_cdf(double t, double c1, double c2, double eps) {
  const double inv = 1.0 / eps;
  return eps / (c2 - c1) * (psi_int((t - c1) * inv) - psi_int((t - c2) * inv));
}

struct AxisMass {
  std::int64_t j_lo = 0;             // first real-line cell index
  std::vector<double> mass;          // mass per real cell, telescoped from the CDF
};

AxisMass axis_masses(double c1, double c2, double eps, int m, bool point_source) {
  AxisMass am;
  const double pad = 6.0 * eps;
  am.j_lo = static_cast<std::int64_t>(std::floor((c1 - pad) * m)) - 1;
  const auto j_hi = static_cast<std::int64_t>(std::ceil((c2 + pad) * m)) + 1;
  const auto cells = static_cast<std::size_t>(j_hi - am.j_lo);
  am.mass.resize(cells);
  double prev = point_source ? normal_cdf((static_cast<double>(am.j_lo) / m - c1) / eps)
                             : segment_cdf(static_cast<double>(am.j_lo) / m, c1, c2, eps);
  for (std::size_t k = 0; k < cells; ++k) {
    const double t = static_cast<double>(am.j_lo + static_cast<std::int64_t>(k) + 1) / m;
    const double cur = point_source ? normal_cdf((t - c1) / eps) : segment_cdf(t, c1, c2, eps);
    am.mass[k] = std::max(cur - prev, 0.0);
    prev = cur;
  }
  return am;
}

}  // namespace

int resolution_for_epsilon(double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("resolution_for_epsilon: epsilon must be > 0");
  return std::max(16, static_cast<int>(std::ceil(4.0 / epsilon)));
}

TransitionGrid build_transition_grid(const MapSpec& map, double epsilon, int resolution) {
  if (!(epsilon > 0.0))
    throw std::invalid_argument(
        "build_transition_grid: epsilon = 0 is rejected (the kernel is singular on the grid)");
  if (epsilon > 1.0) throw std::invalid_argument("build_transition_grid: epsilon must be <= 1");
  const int m = resolution;
  if (m < resolution_for_epsilon(epsilon))
    throw std::invalid_argument("build_transition_grid: resolution " + std::to_string(m) +
                                " does not resolve the kernel; need >= " +
                                std::to_string(resolution_for_epsilon(epsilon)));
  const Eigen::Index d = map.dimension();
  const double cells_d = std::pow(static_cast<double>(m), static_cast<double>(d));
  if (cells_d > static_cast<double>(1 << 24))
    throw std::invalid_argument("build_transition_grid: m^d exceeds the 2^24 cell memory guard");
  const auto n_cells = static_cast<Eigen::Index>(cells_d);

  const bool exact = std::all_of(map.pieces().begin(), map.pieces().end(),
                                 [](const AffinePiece& p) { return p.image_box().has_value(); });

  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  std::vector<double> row_buffer;

  for (Eigen::Index cell = 0; cell < n_cells; ++cell) {
    // Cell box in exact coordinates.
    Box cell_box;
    cell_box.lo.resize(d);
    cell_box.hi.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      cell_box.lo[i] = Rational(idx[static_cast<std::size_t>(i)], m);
      cell_box.hi[i] = Rational(idx[static_cast<std::size_t>(i)] + 1, m);
    }

    row_buffer.assign(static_cast<std::size_t>(n_cells), 0.0);
    const double cell_vol = to_double(cell_box.volume());

    for (const auto& piece : map.pieces()) {
      const auto sub = intersect(cell_box, piece.domain);
      if (!sub) continue;
      const double weight = to_double(sub->volume()) / cell_vol;

      std::vector<AxisMass> axes(static_cast<std::size_t>(d));
      if (exact) {
        // Monomial matrix: the sub-box maps onto an axis-aligned box carrying
        // the uniform density, so axis masses factorize exactly.
        for (Eigen::Index r = 0; r < d; ++r) {
          Eigen::Index c = 0;
          while (piece.matrix(r, c) == 0) ++c;
          const Rational a = piece.matrix(r, c);
          const Rational e0 = a * sub->lo[c] + piece.offset[r];
          const Rational e1 = a * sub->hi[c] + piece.offset[r];
          const double c1 = to_double(std::min(e0, e1));
          const double c2 = to_double(std::max(e0, e1));
          axes[static_cast<std::size_t>(r)] = axis_masses(c1, c2, epsilon, m, false);
        }
      } else {
        // General matrix: image of the sub-box center, mass-weighted.
        RationalVector center(d);
        for (Eigen::Index i = 0; i < d; ++i) center[i] = (sub->lo[i] + sub->hi[i]) / 2;
        const Vector y = to_double(RationalVector(piece.matrix * center + piece.offset));
        for (Eigen::Index r = 0; r < d; ++r)
          axes[static_cast<std::size_t>(r)] = axis_masses(y[r], y[r], epsilon, m, true);
      }

      // Tensor the axis masses, folding real-line cells onto the torus.
      std::vector<std::size_t> t(static_cast<std::size_t>(d), 0);
      while (true) {
        double mass = weight;
        Eigen::Index col = 0;
        for (Eigen::Index r = 0; r < d; ++r) {
          const auto& am = axes[static_cast<std::size_t>(r)];
          const std::size_t k = t[static_cast<std::size_t>(r)];
          mass *= am.mass[k];
          const std::int64_t jr = am.j_lo + static_cast<std::int64_t>(k);
          const auto folded = static_cast<Eigen::Index>(((jr % m) + m) % m);
          col = col * m + folded;
        }
        if (mass > 0.0) row_buffer[static_cast<std::size_t>(col)] += mass;

        Eigen::Index axis = 0;
        for (; axis < d; ++axis) {
          auto a = static_cast<std::size_t>(axis);
          if (++t[a] < axes[a].mass.size()) break;
          t[a] = 0;
        }
        if (axis == d) break;
      }
    }

    for (Eigen::Index j = 0; j < n_cells; ++j) {
      const double v = row_buffer[static_cast<std::size_t>(j)];
      if (v > 1e-16) triplets.emplace_back(static_cast<int>(cell), static_cast<int>(j), v);
    }

    Eigen::Index axis = 0;
    for (; axis < d; ++axis) {
      auto a = static_cast<std::size_t>(axis);
      if (++idx[a] < static_cast<std::size_t>(m)) break;
      idx[a] = 0;
    }
  }

  TransitionGrid grid;
  grid.dimension = d;
  grid.resolution = m;
  grid.exact_construction = exact;
  grid.op.resize(n_cells, n_cells);
  grid.op.setFromTriplets(triplets.begin(), triplets.end());

  // Renormalize rows; the defect is the truncated wrapped-Gaussian tail.
  double max_defect = 0.0;
  for (Eigen::Index i = 0; i < n_cells; ++i) {
    double sum = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(grid.op, i); it; ++it)
      sum += it.value();
    max_defect = std::max(max_defect, std::abs(1.0 - sum));
    if (sum > 0.0) {
      const double inv = 1.0 / sum;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(grid.op, i); it; ++it)
        it.valueRef() *= inv;
    }
  }
  grid.max_renormalization_defect = max_defect;
  return grid;
}

MixingResult mixing_time(const TransitionGrid& grid, double threshold, std::int64_t cap) {
  const Eigen::Index M = grid.cell_count();
  // Dense working set: distributions from every cell-concentrated start.
  const double bytes = 2.0 * static_cast<double>(M) * static_cast<double>(M) * 8.0;
  if (bytes > 2.6e9)
    throw std::runtime_error(
        "mixing_time: dense transition powers exceed the memory budget at " + std::to_string(M) +
        " cells; reduce the resolution or extrapolate from larger epsilon");

  Eigen::SparseMatrix<double> op_col = grid.op;  // column-major copy for the product
  Eigen::MatrixXd dist = Eigen::MatrixXd::Identity(M, M);
  const double uniform = 1.0 / static_cast<double>(M);

  MixingResult res;
  for (std::int64_t k = 1; k <= cap; ++k) {
    dist = (dist * op_col).eval();
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(M);
    for (Eigen::Index j = 0; j < M; ++j)
      acc += (dist.col(j).array() - uniform).abs().matrix();
    const double sup_tv = 0.5 * acc.maxCoeff();
    res.sup_tv.push_back(sup_tv);
    if (sup_tv <= threshold) {
      res.t_mix = static_cast<int>(k);
      return res;
    }
  }
  throw std::runtime_error(
      "mixing_time: iteration cap exceeded before reaching the threshold (epsilon too small "
      "for this resolution?)");
}

}  // namespace residual
