#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "residual/map.hpp"
#include "residual/process.hpp"

namespace residual {

// Exact law of the lattice cube floor(phi(U)) for U uniform on the unit cube.
struct JumpLaw {
  std::vector<std::pair<LatticeVector, Rational>> entries;  // sorted lexicographically

  Rational total_probability() const;
  std::optional<Rational> probability(const LatticeVector& cube) const;
};

JumpLaw exact_jump_law(const MapSpec& map);

// Variance of v . floor(phi(U)) under the exact jump law. This is the
// zero-noise limit the simulated asymptotic variance is compared against.
double theoretical_asyvar(const MapSpec& map, const Vector& v);

struct AsyVarEstimate {
  double slope = 0.0;
  double stderr_ = 0.0;
  std::int64_t n_lo = 0;
  std::int64_t n_hi = 0;
  std::string method;
};

// Least-squares slope of var(v.X_n) over the trailing window, with a
// batch-means standard error over the disjoint path sub-ensembles.
AsyVarEstimate asyvar_fit(const EnsembleMoments& moments, double window_fraction = 0.5);

struct GreenKuboResult {
  std::vector<double> partial_sums;     // k = 0 .. n_max
  std::vector<double> increment_cov;    // lag 0 variance, then lag n covariances
  std::vector<double> jump_cov;         // same for the lattice floor increments
  int grid_size = 0;
  std::optional<int> first_negligible_lag;  // start of 3 consecutive |cov| <= tol
};

// Quadrature over exact orbits started from the stratified midpoint grid
// ((2j+1)/(2*grid_size) per axis). Everything up to the final division is
// rational arithmetic, so the only error is the stratification itself.
GreenKuboResult green_kubo(const MapSpec& map, const Vector& v, int n_max, int grid_size,
                           double negligible_tol = 1e-3);

struct CorrelationDecayResult {
  std::vector<double> c;  // |<f, g o phi^n> - int f int g| for n = 0 .. n_max
  std::optional<double> gamma_hat;
  int fit_lo = 0, fit_hi = 0;
  double noise_floor = 0.0;
};

using TorusFunction = std::function<double(const Vector&)>;

CorrelationDecayResult correlation_decay(const MapSpec& map, const TorusFunction& f,
                                         const TorusFunction& g, int n_max,
                                         int grid_points_per_axis = 1 << 14,
                                         double noise_floor = 1e-12);

// Ulam-style discretization of the one-step torus kernel: deterministic piece
// image convolved with the wrapped Gaussian of width epsilon.
struct TransitionGrid {
  Eigen::Index dimension = 1;
  int resolution = 0;  // cells per axis
  Eigen::SparseMatrix<double, Eigen::RowMajor> op;
  double max_renormalization_defect = 0.0;
  bool exact_construction = true;

  Eigen::Index cell_count() const { return op.rows(); }
};

TransitionGrid build_transition_grid(const MapSpec& map, double epsilon, int resolution);

struct MixingResult {
  int t_mix = 0;
  std::vector<double> sup_tv;  // worst-row total variation after k steps, k = 1 ..
};

MixingResult mixing_time(const TransitionGrid& grid, double threshold = 0.25,
                         std::int64_t cap = 1000000);

// Resolution tied to epsilon (cell width <= epsilon/4, floor 16 cells).
int resolution_for_epsilon(double epsilon);

struct MomentEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::int64_t n_samples = 0;
};

// Monte Carlo E |Delta_0|^p with Delta_0 = floor(phi(U) + eps xi) - floor(phi(U)).
MomentEstimate delta_moment(const MapSpec& map, double epsilon, double p,
                            std::int64_t n_samples, std::uint64_t seed);

struct IndependenceResult {
  int lag = 1;
  double p_value = 1.0;
  double statistic = 0.0;
  std::int64_t dof = 0;
  std::int64_t n_pairs = 0;
  bool coarsened = false;
};

// Chi-square independence test of the lattice jump increments
// D_n = floor(phi(X_n)) - floor(X_n) at the given lags, with non-overlapping
// index pairs so the test is exact under the i.i.d. hypothesis.
std::vector<IndependenceResult> increment_independence(const MapSpec& map, double epsilon,
                                                       std::int64_t n_steps,
                                                       std::int64_t n_paths, std::uint64_t seed,
                                                       const std::vector<int>& lags = {1});

// Same test on a caller-supplied category pair stream (calibration hook).
IndependenceResult independence_test_pairs(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& pairs, int lag = 1);

struct Psi2Fit {
  double c = 0.0;
  double stderr_ = 0.0;
  bool upper_bound_only = false;
};

// Empirical subgaussian scale: bisects c until the winsorized moment
// E exp(|Y|^2/c^2) crosses 2; bootstrap standard error.
Psi2Fit tail_diagnostic(const std::vector<double>& samples, std::uint64_t seed = 1,
                        int n_bootstrap = 32);

struct LagCovariance {
  int lag = 0;
  double cov = 0.0;
  double stderr_ = 0.0;
};

// |cov(v.Delta_m, v.Delta_{m+n+1})| estimates for the noise-induced jump
// increments, batch-means standard errors.
std::vector<LagCovariance> covj_decay(const MapSpec& map, double epsilon, int m_fixed, int n_max,
                                      std::int64_t n_paths, const Vector& v, std::uint64_t seed);

}  // namespace residual
