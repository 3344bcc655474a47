#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "residual/map.hpp"
#include "residual/rng.hpp"
#include "residual/welford.hpp"

namespace residual {

// Subgaussian initial laws for X_0.
struct InitialDistribution {
  enum class Kind { kPoint, kUniformCube, kGaussian };
  Kind kind = Kind::kUniformCube;
  Vector point;  // point: the atom; gaussian: the mean
  double sigma = 1.0;

  static InitialDistribution point_mass(Vector x0);
  static InitialDistribution uniform_cube();
  static InitialDistribution gaussian(Vector mean, double sigma);

  std::string describe() const;
};

struct SimulationConfig {
  std::shared_ptr<const MapSpec> map;
  double epsilon = 0.0;
  std::int64_t n_steps = 1;
  std::int64_t n_paths = 1;
  InitialDistribution initial;
  Vector direction;  // normalized to unit length on validate()
  std::uint64_t seed = 0;
  bool record_decomposition = false;
  int n_batches = 16;  // disjoint path sub-ensembles for stderr estimation

  void validate_and_normalize();
};

// Streaming per-step moments of v.X_n (and of the S/J/R components when
// recorded) over the path ensemble, plus per-batch copies of the same.
struct EnsembleMoments {
  std::int64_t n_steps = 0;
  std::int64_t count = 0;
  bool has_decomposition = false;

  std::vector<Welford> x;  // index n in [0, n_steps]
  std::vector<Welford> s, j, r;

  std::vector<std::vector<Welford>> batch_x;
  std::vector<std::vector<Welford>> batch_s;

  std::vector<double> variance_series() const;
  std::vector<double> mean_series() const;

  void write_csv(std::ostream& os) const;
};

// Per-path running decomposition X_n = S_n + J_n + R_n. S and J are exact
// integer vectors; R carries everything else.
struct DecompositionState {
  LatticeVector s;
  LatticeVector j;
  Vector r;
};

DecompositionState decompose_init(const Vector& x0);

// One transition of the chain.
Vector step(const MapSpec& map, const Vector& x, double epsilon, const Vector& xi);

// Folds the transition x_prev -> x_next into the decomposition. phi_prev must
// be the deterministic image computed by the same apply() call that produced
// x_next, so both sides floor identical doubles.
void decompose_update(const Vector& x_prev, const Vector& phi_prev, const Vector& x_next,
                      DecompositionState& state);

EnsembleMoments simulate_ensemble(const SimulationConfig& cfg);

// Exact orbit of the noiseless map; exists because double precision collapses
// expanding orbits to the fixed lattice within ~52 steps.
std::vector<RationalVector> noiseless_orbit(const MapSpec& map, const RationalVector& x0,
                                            std::int64_t n_steps,
                                            std::size_t max_denominator_bits = 1 << 16);

// sim/v1 structured text.
SimulationConfig read_simulation_config(const std::string& path);
SimulationConfig parse_simulation_config(const std::string& text);

}  // namespace residual
