#include "residual/map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "residual/config.hpp"

namespace residual {

namespace {

Rational rational_det(const RationalMatrix& m) {
  const Eigen::Index n = m.rows();
  if (n == 1) return m(0, 0);
  if (n == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  Rational det(0);
  int sign = 1;
  for (Eigen::Index c = 0; c < n; ++c) {
    RationalMatrix minor(n - 1, n - 1);
    for (Eigen::Index r = 1; r < n; ++r) {
      Eigen::Index cc = 0;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (k == c) continue;
        minor(r - 1, cc++) = m(r, k);
      }
    }
    if (m(0, c) != 0) det += Rational(sign) * m(0, c) * rational_det(minor);
    sign = -sign;
  }
  return det;
}

bool is_monomial(const RationalMatrix& m) {
  const Eigen::Index n = m.rows();
  std::vector<int> col_hits(static_cast<std::size_t>(n), 0);
  for (Eigen::Index r = 0; r < n; ++r) {
    int row_hits = 0;
    for (Eigen::Index c = 0; c < n; ++c) {
      if (m(r, c) != 0) {
        ++row_hits;
        ++col_hits[static_cast<std::size_t>(c)];
      }
    }
    if (row_hits != 1) return false;
  }
  return std::all_of(col_hits.begin(), col_hits.end(), [](int h) { return h == 1; });
}

bool is_integer(const Rational& q) { return denominator(q) == 1; }

}  // namespace

Rational AffinePiece::determinant() const { return rational_det(matrix); }

std::optional<Box> AffinePiece::image_box() const {
  if (!is_monomial(matrix)) return std::nullopt;
  const Eigen::Index d = dim();
  Box img;
  img.lo.resize(d);
  img.hi.resize(d);
  for (Eigen::Index r = 0; r < d; ++r) {
    Eigen::Index c = 0;
    while (matrix(r, c) == 0) ++c;
    const Rational a = matrix(r, c);
    Rational e0 = a * domain.lo[c] + offset[r];
    Rational e1 = a * domain.hi[c] + offset[r];
    img.lo[r] = std::min(e0, e1);
    img.hi[r] = std::max(e0, e1);
  }
  return img;
}

RationalVector AffinePiece::apply(const RationalVector& u) const {
  return matrix * u + offset;
}

MapSpec::MapSpec(Eigen::Index dimension, std::string name, std::vector<AffinePiece> pieces)
    : dimension_(dimension), name_(std::move(name)), pieces_(std::move(pieces)) {
  if (dimension_ < 1) throw std::invalid_argument("MapSpec: dimension must be >= 1");
  if (pieces_.empty()) throw std::invalid_argument("MapSpec: at least one piece required");
  for (const auto& p : pieces_) {
    if (p.dim() != dimension_ || p.matrix.rows() != dimension_ ||
        p.matrix.cols() != dimension_ || p.offset.size() != dimension_)
      throw std::invalid_argument("MapSpec: piece dimension mismatch in map '" + name_ + "'");
    if (p.target_cube && p.target_cube->size() != dimension_)
      throw std::invalid_argument("MapSpec: target_cube dimension mismatch in map '" + name_ + "'");
  }

  // Canonical ordering: ascending volume, ties broken lexicographically.
  std::sort(pieces_.begin(), pieces_.end(), [](const AffinePiece& a, const AffinePiece& b) {
    const Rational va = a.volume(), vb = b.volume();
    if (va != vb) return va < vb;
    for (Eigen::Index i = 0; i < a.dim(); ++i)
      if (a.domain.lo[i] != b.domain.lo[i]) return a.domain.lo[i] < b.domain.lo[i];
    return false;
  });

  // Record inferred target cubes where the image is a full lattice cube.
  for (auto& p : pieces_) {
    if (p.target_cube) continue;
    auto img = p.image_box();
    if (!img) continue;
    bool full_cube = true;
    LatticeVector k(dimension_);
    for (Eigen::Index i = 0; i < dimension_ && full_cube; ++i) {
      full_cube = is_integer(img->lo[i]) && (img->hi[i] - img->lo[i] == 1);
      if (full_cube) k[i] = numerator(img->lo[i]).convert_to<std::int64_t>();
    }
    if (full_cube) p.target_cube = k;
  }

  // Displacement bound: affine displacement attains its extrema at the
  // closed-domain corners.
  Rational best_sq(0);
  for (const auto& p : pieces_) {
    const auto corners = std::size_t{1} << static_cast<unsigned>(dimension_);
    for (std::size_t mask = 0; mask < corners; ++mask) {
      RationalVector y(dimension_);
      for (Eigen::Index i = 0; i < dimension_; ++i)
        y[i] = (mask >> static_cast<unsigned>(i)) & 1 ? p.domain.hi[i] : p.domain.lo[i];
      RationalVector disp = p.matrix * y + p.offset - y;
      Rational sq(0);
      for (Eigen::Index i = 0; i < dimension_; ++i) sq += disp[i] * disp[i];
      best_sq = std::max(best_sq, sq);
    }
  }
  displacement_bound_ = std::sqrt(to_double(best_sq));

  // Double-precision caches for the simulation path.
  cache_.reserve(pieces_.size());
  for (const auto& p : pieces_) {
    PieceCache c;
    c.lo = to_double(p.domain.lo);
    c.hi = to_double(p.domain.hi);
    c.offset = to_double(p.offset);
    c.matrix.resize(dimension_, dimension_);
    for (Eigen::Index r = 0; r < dimension_; ++r)
      for (Eigen::Index cc = 0; cc < dimension_; ++cc) c.matrix(r, cc) = to_double(p.matrix(r, cc));
    cache_.push_back(std::move(c));
  }
  if (dimension_ == 1) {
    for (std::size_t i = 0; i < pieces_.size(); ++i)
      pieces1_.push_back({cache_[i].lo[0], cache_[i].hi[0], cache_[i].matrix(0, 0),
                          cache_[i].offset[0]});
    std::sort(pieces1_.begin(), pieces1_.end(),
              [](const Piece1& a, const Piece1& b) { return a.lo < b.lo; });
  }

  // The Bernoulli structure is paid for up front so callers can gate on it.
  ValidationReport report = validate();
  if (report.bernoulli_pass) {
    BernoulliPartition bp;
    bp.dimension = dimension_;
    bp.pieces = pieces_;
    bernoulli_ = std::move(bp);
  }
}

int MapSpec::find_piece(const Vector& u) const {
  for (std::size_t i = 0; i < cache_.size(); ++i) {
    const auto& c = cache_[i];
    bool inside = true;
    for (Eigen::Index k = 0; k < dimension_ && inside; ++k)
      inside = (u[k] >= c.lo[k]) && (u[k] < c.hi[k]);
    if (inside) return static_cast<int>(i);
  }
  return -1;
}

Vector MapSpec::apply(const Vector& x) const {
  if (x.size() != dimension_) throw std::invalid_argument("apply: dimension mismatch");
  Vector frac(dimension_), base(dimension_);
  for (Eigen::Index i = 0; i < dimension_; ++i) {
    const std::int64_t k = floor_coord(x[i]);
    base[i] = static_cast<double>(k);
    double f = x[i] - base[i];
    if (f < 0.0) f = 0.0;
    frac[i] = f;
  }
  const int pi = find_piece(frac);
  if (pi < 0) {
    std::ostringstream os;
    os << "apply: point (";
    for (Eigen::Index i = 0; i < dimension_; ++i) os << (i ? "," : "") << frac[i];
    os << ") falls in a coverage gap of map '" << name_ << "'";
    throw std::runtime_error(os.str());
  }
  const auto& c = cache_[static_cast<std::size_t>(pi)];
  return base + c.matrix * frac + c.offset;
}

double MapSpec::apply1(double x) const {
  const auto k = static_cast<double>(floor_coord(x));
  double u = x - k;
  if (u < 0.0) u = 0.0;
  for (const Piece1& p : pieces1_) {
    if (u < p.hi) {
      if (u >= p.lo) return k + p.slope * u + p.offset;
      break;
    }
  }
  throw std::runtime_error("apply1: point " + std::to_string(u) +
                           " falls in a coverage gap of map '" + name_ + "'");
}

const AffinePiece& MapSpec::piece_containing(const RationalVector& u) const {
  for (const auto& p : pieces_)
    if (p.domain.contains(u)) return p;
  throw std::runtime_error("piece_containing: point falls in a coverage gap of map '" + name_ + "'");
}

RationalVector MapSpec::apply(const RationalVector& x) const {
  RationalVector frac(dimension_), base(dimension_);
  for (Eigen::Index i = 0; i < dimension_; ++i) {
    const Rational f(floor_rational(x[i]));
    base[i] = f;
    frac[i] = x[i] - f;
  }
  const AffinePiece& p = piece_containing(frac);
  return base + p.apply(frac);
}

ValidationReport MapSpec::validate() const {
  ValidationReport rep;
  const Rational zero(0), one(1);

  Box q0;
  q0.lo = RationalVector::Constant(dimension_, zero);
  q0.hi = RationalVector::Constant(dimension_, one);

  bool domains_ok = true;
  std::vector<Box> domains;
  for (const auto& p : pieces_) {
    domains.push_back(p.domain);
    for (Eigen::Index i = 0; i < dimension_; ++i) {
      if (p.domain.lo[i] < 0 || p.domain.hi[i] > 1 || p.domain.lo[i] >= p.domain.hi[i]) {
        domains_ok = false;
        rep.problems.push_back("piece domain not a nonempty sub-box of the unit cube");
      }
    }
  }

  // Coverage audit of the unit cube.
  for (const auto& cell : coverage_cells(q0, domains)) {
    if (cell.multiplicity == 0) rep.coverage_gap += cell.cell.volume();
    if (cell.multiplicity > 1)
      rep.coverage_overlap += Rational(cell.multiplicity - 1) * cell.cell.volume();
  }
  if (rep.coverage_gap != 0)
    rep.problems.push_back("piece domains leave a gap of volume " + format_rational(rep.coverage_gap));
  if (rep.coverage_overlap != 0)
    rep.problems.push_back("piece domains overlap with volume " +
                           format_rational(rep.coverage_overlap));

  // Per-piece audit.
  bool all_monomial = true;
  bool dets_ok = true;
  bool all_full_cubes = true;
  bool targets_ok = true;
  for (const auto& p : pieces_) {
    PieceReport pr;
    pr.volume = p.volume();
    const Rational det = p.determinant();
    if (det == 0) {
      dets_ok = false;
      pr.note = "singular matrix";
      rep.problems.push_back("piece has singular matrix");
      rep.pieces.push_back(std::move(pr));
      all_monomial = false;
      continue;
    }
    pr.det_vol_deviation = abs(det) * pr.volume - one;
    auto img = p.image_box();
    pr.image_axis_aligned = img.has_value();
    if (!img) {
      all_monomial = false;
      all_full_cubes = false;
      pr.note = "image is not axis-aligned";
      rep.pieces.push_back(std::move(pr));
      continue;
    }
    bool full_cube = true;
    LatticeVector cube(dimension_);
    for (Eigen::Index i = 0; i < dimension_ && full_cube; ++i) {
      full_cube = is_integer(img->lo[i]) && (img->hi[i] - img->lo[i] == 1);
      if (full_cube) cube[i] = numerator(img->lo[i]).convert_to<std::int64_t>();
    }
    pr.image_full_cube = full_cube;
    if (!full_cube) {
      all_full_cubes = false;
      pr.note = "image is not a full integer cube";
    } else if (p.target_cube) {
      pr.target_matches = (*p.target_cube == cube);
      if (!pr.target_matches) {
        targets_ok = false;
        rep.problems.push_back("declared target cube does not match the piece image");
      }
    } else {
      pr.target_matches = true;
    }
    rep.pieces.push_back(std::move(pr));
  }

  // Pushforward density audit: the projected one-step image of Lebesgue on
  // the unit cube must have density exactly 1. Exact when every image is a
  // box; otherwise reported as unchecked.
  if (all_monomial && dets_ok && domains_ok) {
    std::vector<Box> translated;
    std::vector<Rational> weights;
    for (const auto& p : pieces_) {
      const Rational inv_det = one / abs(p.determinant());
      const Box img = *p.image_box();
      LatticeVector klo(dimension_), khi(dimension_);
      for (Eigen::Index i = 0; i < dimension_; ++i) {
        klo[i] = floor_rational(img.lo[i]).convert_to<std::int64_t>();
        BigInt h = floor_rational(img.hi[i]);
        if (Rational(h) == img.hi[i]) --h;  // half-open upper face
        khi[i] = h.convert_to<std::int64_t>();
      }
      LatticeVector k = klo;
      while (true) {
        Box cube;
        cube.lo.resize(dimension_);
        cube.hi.resize(dimension_);
        for (Eigen::Index i = 0; i < dimension_; ++i) {
          cube.lo[i] = Rational(k[i]);
          cube.hi[i] = Rational(k[i] + 1);
        }
        if (auto sub = intersect(img, cube)) {
          Box moved = *sub;
          for (Eigen::Index i = 0; i < dimension_; ++i) {
            moved.lo[i] -= Rational(k[i]);
            moved.hi[i] -= Rational(k[i]);
          }
          translated.push_back(std::move(moved));
          weights.push_back(inv_det);
        }
        Eigen::Index axis = 0;
        for (; axis < dimension_; ++axis) {
          if (++k[axis] <= khi[axis]) break;
          k[axis] = klo[axis];
        }
        if (axis == dimension_) break;
      }
    }
    rep.density_checked = true;
    for (const auto& [cell, density] : weighted_cells(q0, translated, weights)) {
      (void)cell;
      rep.density_deviation = std::max(rep.density_deviation, abs(density - one));
    }
    if (rep.density_deviation != 0)
      rep.problems.push_back("pushforward density deviates from 1 by " +
                             format_rational(rep.density_deviation) +
                             " (map does not preserve Lebesgue measure)");
  } else if (!all_monomial) {
    rep.problems.push_back(
        "pushforward density audit skipped: non-axis-aligned piece images "
        "(per-piece determinant bookkeeping only)");
  }

  rep.map_pass = domains_ok && dets_ok && rep.coverage_gap == 0 && rep.coverage_overlap == 0 &&
                 (!rep.density_checked || rep.density_deviation == 0);

  bool det_vol_ok = std::all_of(rep.pieces.begin(), rep.pieces.end(), [](const PieceReport& pr) {
    return pr.det_vol_deviation == 0;
  });
  rep.bernoulli_pass = rep.map_pass && pieces_.size() >= 2 && all_full_cubes && targets_ok &&
                       det_vol_ok && rep.density_checked;
  if (pieces_.size() < 2 && all_full_cubes)
    rep.problems.push_back("Bernoulli structure requires at least 2 pieces");

  return rep;
}

std::string ValidationReport::to_text() const {
  std::ostringstream os;
  os << "map:       " << (map_pass ? "PASS" : "FAIL") << "\n";
  os << "bernoulli: " << (bernoulli_pass ? "PASS" : "FAIL") << "\n";
  os << "coverage_gap = " << format_rational(coverage_gap)
     << ", coverage_overlap = " << format_rational(coverage_overlap) << "\n";
  if (density_checked)
    os << "pushforward_density_deviation = " << format_rational(density_deviation) << "\n";
  else
    os << "pushforward_density_deviation = unchecked\n";
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const auto& pr = pieces[i];
    os << "piece " << i << ": volume = " << format_rational(pr.volume)
       << ", det_vol_deviation = " << format_rational(pr.det_vol_deviation)
       << ", full_cube = " << (pr.image_full_cube ? "yes" : "no")
       << ", target_match = " << (pr.target_matches ? "yes" : "no");
    if (!pr.note.empty()) os << " (" << pr.note << ")";
    os << "\n";
  }
  for (const auto& p : problems) os << "problem: " << p << "\n";
  return os.str();
}

ValidationReport validate_bernoulli(const BernoulliPartition& partition) {
  MapSpec map(partition.dimension, "partition", partition.pieces);
  return map.validate();
}

// ---------------------------------------------------------------------------
// Built-ins
// ---------------------------------------------------------------------------

namespace {

AffinePiece piece_1d(const Rational& lo, const Rational& hi, const Rational& slope,
                     const Rational& offset) {
  AffinePiece p;
  p.domain.lo = RationalVector::Constant(1, lo);
  p.domain.hi = RationalVector::Constant(1, hi);
  p.matrix = RationalMatrix::Constant(1, 1, slope);
  p.offset = RationalVector::Constant(1, offset);
  return p;
}

}  // namespace

MapSpec doubling_1d() {
  std::vector<AffinePiece> pieces;
  pieces.push_back(piece_1d(Rational(0), Rational(1, 2), Rational(2), Rational(0)));
  pieces.push_back(piece_1d(Rational(1, 2), Rational(1), Rational(2), Rational(0)));
  return MapSpec(1, "doubling", std::move(pieces));
}

MapSpec shifted_doubling_1d() {
  std::vector<AffinePiece> pieces;
  pieces.push_back(piece_1d(Rational(0), Rational(1, 4), Rational(2), Rational(-1, 2)));
  pieces.push_back(piece_1d(Rational(1, 4), Rational(3, 4), Rational(2), Rational(-1, 2)));
  pieces.push_back(piece_1d(Rational(3, 4), Rational(1), Rational(2), Rational(-1, 2)));
  return MapSpec(1, "shifted_doubling", std::move(pieces));
}

MapSpec m_ary_expanding_1d(int m, const std::vector<std::int64_t>& offsets) {
  if (m < 2) throw std::invalid_argument("m_ary_expanding_1d: need m >= 2");
  if (offsets.size() != static_cast<std::size_t>(m))
    throw std::invalid_argument("m_ary_expanding_1d: offsets must have length m");
  std::vector<AffinePiece> pieces;
  for (int k = 0; k < m; ++k) {
    // [k/m, (k+1)/m) -> [o_k, o_k + 1)
    pieces.push_back(piece_1d(Rational(k, m), Rational(k + 1, m), Rational(m),
                              Rational(offsets[static_cast<std::size_t>(k)] - k)));
  }
  std::ostringstream name;
  name << "mary:" << m << ":";
  for (std::size_t i = 0; i < offsets.size(); ++i) name << (i ? "," : "") << offsets[i];
  return MapSpec(1, name.str(), std::move(pieces));
}

MapSpec translation_map(const LatticeVector& shift) {
  const Eigen::Index d = shift.size();
  AffinePiece p;
  p.domain.lo = RationalVector::Constant(d, Rational(0));
  p.domain.hi = RationalVector::Constant(d, Rational(1));
  p.matrix = RationalMatrix::Identity(d, d);
  p.offset.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) p.offset[i] = Rational(shift[i]);
  std::ostringstream name;
  bool zero = shift.isZero();
  if (zero) {
    name << "identity";
    if (d > 1) name << d << "d";
  } else {
    name << "shift:";
    for (Eigen::Index i = 0; i < d; ++i) name << (i ? "," : "") << shift[i];
  }
  return MapSpec(d, name.str(), {std::move(p)});
}

MapSpec product_map(const std::vector<MapSpec>& factors) {
  if (factors.empty()) throw std::invalid_argument("product_map: need at least one factor");
  Eigen::Index d = 0;
  for (const auto& f : factors) d += f.dimension();

  std::vector<AffinePiece> pieces;
  std::vector<std::size_t> idx(factors.size(), 0);
  while (true) {
    AffinePiece p;
    p.domain.lo.resize(d);
    p.domain.hi.resize(d);
    p.matrix = RationalMatrix::Constant(d, d, Rational(0));
    p.offset.resize(d);
    LatticeVector target(d);
    bool has_target = true;
    Eigen::Index at = 0;
    for (std::size_t f = 0; f < factors.size(); ++f) {
      const AffinePiece& fp = factors[f].pieces()[idx[f]];
      const Eigen::Index fd = fp.dim();
      for (Eigen::Index i = 0; i < fd; ++i) {
        p.domain.lo[at + i] = fp.domain.lo[i];
        p.domain.hi[at + i] = fp.domain.hi[i];
        p.offset[at + i] = fp.offset[i];
        for (Eigen::Index j = 0; j < fd; ++j) p.matrix(at + i, at + j) = fp.matrix(i, j);
        if (fp.target_cube)
          target[at + i] = (*fp.target_cube)[i];
        else
          has_target = false;
      }
      at += fd;
    }
    if (has_target) p.target_cube = target;
    pieces.push_back(std::move(p));

    std::size_t f = 0;
    for (; f < factors.size(); ++f) {
      if (++idx[f] < factors[f].pieces().size()) break;
      idx[f] = 0;
    }
    if (f == factors.size()) break;
  }

  std::ostringstream name;
  name << "product:";
  for (std::size_t f = 0; f < factors.size(); ++f) name << (f ? "," : "") << factors[f].name();
  return MapSpec(d, name.str(), std::move(pieces));
}

// ---------------------------------------------------------------------------
// maps/v1 structured text
// ---------------------------------------------------------------------------

namespace {

RationalVector parse_rational_vector(const std::string& text, Eigen::Index d,
                                     const std::string& what) {
  auto items = split_list(text);
  if (items.size() != static_cast<std::size_t>(d))
    throw ConfigError(what + ": expected " + std::to_string(d) + " components, got " +
                      std::to_string(items.size()));
  RationalVector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = parse_rational(items[static_cast<std::size_t>(i)]);
  return v;
}

RationalMatrix parse_rational_matrix(const std::string& text, Eigen::Index d) {
  std::vector<std::string> rows;
  std::string row;
  std::istringstream in(text);
  while (std::getline(in, row, ';')) rows.push_back(row);
  if (rows.size() != static_cast<std::size_t>(d))
    throw ConfigError("matrix: expected " + std::to_string(d) + " rows");
  RationalMatrix m(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    RationalVector rv = parse_rational_vector(rows[static_cast<std::size_t>(r)], d, "matrix row");
    for (Eigen::Index c = 0; c < d; ++c) m(r, c) = rv[c];
  }
  return m;
}

}  // namespace

MapSpec read_map_text(const std::string& text) {
  ConfigDoc doc = parse_config_text(text, "maps/v1");
  const auto d = static_cast<Eigen::Index>(config_int(doc.root, "dimension"));
  if (d < 1) throw ConfigError("dimension must be >= 1");
  std::string name = doc.root.find("name") ? *doc.root.find("name") : "unnamed";

  std::vector<AffinePiece> pieces;
  for (const ConfigSection* s : doc.sections_named("piece")) {
    AffinePiece p;
    p.domain.lo = parse_rational_vector(s->require("lo"), d, "lo");
    p.domain.hi = parse_rational_vector(s->require("hi"), d, "hi");
    p.matrix = parse_rational_matrix(s->require("matrix"), d);
    p.offset = parse_rational_vector(s->require("offset"), d, "offset");
    if (const std::string* t = s->find("target_cube")) {
      RationalVector tv = parse_rational_vector(*t, d, "target_cube");
      LatticeVector k(d);
      for (Eigen::Index i = 0; i < d; ++i) {
        if (denominator(tv[i]) != 1)
          throw ConfigError("target_cube components must be integers");
        k[i] = numerator(tv[i]).convert_to<std::int64_t>();
      }
      p.target_cube = k;
    }
    pieces.push_back(std::move(p));
  }
  if (pieces.empty()) throw ConfigError("maps/v1 document declares no [piece] sections");
  return MapSpec(d, name, std::move(pieces));
}

MapSpec read_map_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open map file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return read_map_text(buf.str());
}

std::string write_map_text(const MapSpec& map) {
  std::ostringstream os;
  os << "schema = maps/v1\n";
  os << "name = " << map.name() << "\n";
  os << "dimension = " << map.dimension() << "\n";
  for (const auto& p : map.pieces()) {
    os << "\n[piece]\n";
    auto vec = [&os](const char* key, const RationalVector& v) {
      os << key << " = ";
      for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << format_rational(v[i]);
      os << "\n";
    };
    vec("lo", p.domain.lo);
    vec("hi", p.domain.hi);
    os << "matrix = ";
    for (Eigen::Index r = 0; r < p.matrix.rows(); ++r) {
      if (r) os << "; ";
      for (Eigen::Index c = 0; c < p.matrix.cols(); ++c)
        os << (c ? ", " : "") << format_rational(p.matrix(r, c));
    }
    os << "\n";
    vec("offset", p.offset);
    if (p.target_cube) {
      os << "target_cube = ";
      for (Eigen::Index i = 0; i < p.target_cube->size(); ++i)
        os << (i ? ", " : "") << (*p.target_cube)[i];
      os << "\n";
    }
  }
  return os.str();
}

std::shared_ptr<const MapSpec> resolve_map(const std::string& name_or_path) {
  const std::string& s = name_or_path;
  auto make = [](MapSpec m) { return std::make_shared<const MapSpec>(std::move(m)); };
  if (s == "doubling") return make(doubling_1d());
  if (s == "shifted_doubling") return make(shifted_doubling_1d());
  if (s == "identity") {
    LatticeVector k = LatticeVector::Zero(1);
    return make(translation_map(k));
  }
  if (s.rfind("shift:", 0) == 0) {
    auto items = split_list(s.substr(6));
    LatticeVector k(static_cast<Eigen::Index>(items.size()));
    for (std::size_t i = 0; i < items.size(); ++i) k[static_cast<Eigen::Index>(i)] = std::stoll(items[i]);
    return make(translation_map(k));
  }
  if (s.rfind("mary:", 0) == 0) {
    auto rest = s.substr(5);
    auto colon = rest.find(':');
    if (colon == std::string::npos) throw ConfigError("mary:<m>:<o1,...,om> expected");
    int m = std::stoi(rest.substr(0, colon));
    std::vector<std::int64_t> offsets;
    for (const auto& item : split_list(rest.substr(colon + 1))) offsets.push_back(std::stoll(item));
    return make(m_ary_expanding_1d(m, offsets));
  }
  if (s.rfind("product:", 0) == 0) {
    std::vector<MapSpec> factors;
    for (const auto& item : split_list(s.substr(8))) factors.push_back(*resolve_map(item));
    return make(product_map(factors));
  }
  return make(read_map_file(s));
}

}  // namespace residual
