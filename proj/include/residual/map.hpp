#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "residual/box.hpp"
#include "residual/lattice.hpp"
#include "residual/rational.hpp"

namespace residual {

// One affine branch of a piecewise map on the unit cube: x in `domain` is
// sent to matrix*x + offset. `target_cube` declares (or records) the integer
// cube the image is supposed to fill; it stays empty for branches whose image
// is not a full lattice cube, e.g. the shifted doubling pieces.
struct AffinePiece {
  Box domain;
  RationalMatrix matrix;
  RationalVector offset;
  std::optional<LatticeVector> target_cube;

  Eigen::Index dim() const { return domain.dim(); }
  Rational volume() const { return domain.volume(); }

  Rational determinant() const;

  // Exact image of the domain box when the matrix is monomial (one nonzero
  // per row and column, so boxes map to boxes); nullopt otherwise. Half-open
  // orientation is tracked only up to null boundary sets.
  std::optional<Box> image_box() const;

  RationalVector apply(const RationalVector& u) const;  // u in domain
};

struct BernoulliPartition {
  Eigen::Index dimension = 0;
  std::vector<AffinePiece> pieces;  // every piece carries target_cube

  std::size_t piece_count() const { return pieces.size(); }
};

struct PieceReport {
  Rational volume;
  Rational det_vol_deviation;  // |det| * vol(domain) - 1
  bool image_axis_aligned = false;
  bool image_full_cube = false;
  bool target_matches = false;  // image equals declared target cube
  std::string note;
};

struct ValidationReport {
  bool map_pass = false;        // measure-preserving map with periodic displacement
  bool bernoulli_pass = false;  // full expanding-Bernoulli structure
  std::vector<PieceReport> pieces;
  Rational coverage_gap = Rational(0);
  Rational coverage_overlap = Rational(0);
  Rational density_deviation = Rational(0);  // max |pushforward density - 1|
  bool density_checked = false;
  std::vector<std::string> problems;

  std::string to_text() const;
};

// Piecewise-affine Lebesgue-measure-preserving map with Z^d-periodic
// displacement. Immutable after construction; share freely across threads.
class MapSpec {
 public:
  MapSpec(Eigen::Index dimension, std::string name, std::vector<AffinePiece> pieces);

  Eigen::Index dimension() const { return dimension_; }
  const std::string& name() const { return name_; }
  const std::vector<AffinePiece>& pieces() const { return pieces_; }
  double displacement_bound() const { return displacement_bound_; }
  const std::optional<BernoulliPartition>& bernoulli() const { return bernoulli_; }

  // phi(x) = floor(x) + piece(x - floor(x)); throws if the fractional part
  // falls in a coverage gap, naming the offending point.
  Vector apply(const Vector& x) const;
  RationalVector apply(const RationalVector& x) const;

  double apply1(double x) const;  // d == 1 fast path

  const AffinePiece& piece_containing(const RationalVector& u) const;

  ValidationReport validate() const;

 private:
  Eigen::Index dimension_;
  std::string name_;
  std::vector<AffinePiece> pieces_;
  double displacement_bound_ = 0.0;
  std::optional<BernoulliPartition> bernoulli_;

  struct Piece1 {
    double lo, hi, slope, offset;
  };
  std::vector<Piece1> pieces1_;  // populated when dimension == 1

  struct PieceCache {
    Eigen::VectorXd lo, hi, offset;
    Eigen::MatrixXd matrix;
  };
  std::vector<PieceCache> cache_;

  int find_piece(const Vector& u) const;
};

ValidationReport validate_bernoulli(const BernoulliPartition& partition);

// Built-in constructors.
MapSpec doubling_1d();
MapSpec shifted_doubling_1d();
MapSpec m_ary_expanding_1d(int m, const std::vector<std::int64_t>& offsets);
MapSpec translation_map(const LatticeVector& shift);
MapSpec product_map(const std::vector<MapSpec>& factors);

// Resolves builtin names ("doubling", "shifted_doubling", "identity",
// "shift:<k>", "mary:<m>:<o1,...,om>", "product:<name>,<name>") or falls back
// to reading a maps/v1 file.
std::shared_ptr<const MapSpec> resolve_map(const std::string& name_or_path);

// maps/v1 structured text.
MapSpec read_map_text(const std::string& text);
MapSpec read_map_file(const std::string& path);
std::string write_map_text(const MapSpec& map);

}  // namespace residual
