#include "residual/process.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "residual/config.hpp"
#include "residual/parallel.hpp"

namespace residual {

namespace {

constexpr std::int64_t kPathBlock = 8192;

std::uint32_t checked_step_count(std::int64_t n) {
  if (n < 1 || n > 0x7FFFFFFF) throw std::invalid_argument("n_steps out of range");
  return static_cast<std::uint32_t>(n);
}

}  // namespace

InitialDistribution InitialDistribution::point_mass(Vector x0) {
  InitialDistribution d;
  d.kind = Kind::kPoint;
  d.point = std::move(x0);
  return d;
}

InitialDistribution InitialDistribution::uniform_cube() {
  InitialDistribution d;
  d.kind = Kind::kUniformCube;
  return d;
}

InitialDistribution InitialDistribution::gaussian(Vector mean, double sigma) {
  InitialDistribution d;
  d.kind = Kind::kGaussian;
  d.point = std::move(mean);
  d.sigma = sigma;
  return d;
}

std::string InitialDistribution::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::kPoint:
      os << "point(";
      for (Eigen::Index i = 0; i < point.size(); ++i) os << (i ? "," : "") << point[i];
      os << ")";
      break;
    case Kind::kUniformCube:
      os << "uniform_cube";
      break;
    case Kind::kGaussian:
      os << "gaussian(";
      for (Eigen::Index i = 0; i < point.size(); ++i) os << (i ? "," : "") << point[i];
      os << "; " << sigma << ")";
      break;
  }
  return os.str();
}

void SimulationConfig::validate_and_normalize() {
  if (!map) throw std::invalid_argument("SimulationConfig: map not set");
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("SimulationConfig: epsilon must lie in [0, 1]");
  if (n_steps < 1) throw std::invalid_argument("SimulationConfig: n_steps must be >= 1");
  if (n_paths < 1) throw std::invalid_argument("SimulationConfig: n_paths must be >= 1");
  if (n_batches < 1) n_batches = 1;
  const Eigen::Index d = map->dimension();
  if (direction.size() == 0) direction = Vector::Ones(d);
  if (direction.size() != d)
    throw std::invalid_argument("SimulationConfig: direction dimension mismatch");
  const double norm = direction.norm();
  if (!(norm > 0.0)) throw std::invalid_argument("SimulationConfig: direction must be nonzero");
  direction /= norm;
  switch (initial.kind) {
    case InitialDistribution::Kind::kPoint:
    case InitialDistribution::Kind::kGaussian:
      if (initial.point.size() != d)
        throw std::invalid_argument("SimulationConfig: initial distribution dimension mismatch");
      if (initial.kind == InitialDistribution::Kind::kGaussian && !(initial.sigma >= 0.0))
        throw std::invalid_argument("SimulationConfig: gaussian sigma must be >= 0");
      break;
    case InitialDistribution::Kind::kUniformCube:
      break;
  }
}

std::vector<double> EnsembleMoments::variance_series() const {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i].variance();
  return out;
}

std::vector<double> EnsembleMoments::mean_series() const {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i].mean;
  return out;
}

void EnsembleMoments::write_csv(std::ostream& os) const {
  char buf[512];
  if (has_decomposition)
    os << "n,count,mean_vX,var_vX,mean_vS,var_vS,mean_vJ,var_vJ,mean_vR,var_vR\n";
  else
    os << "n,count,mean_vX,var_vX\n";
  for (std::size_t n = 0; n < x.size(); ++n) {
    if (has_decomposition) {
      std::snprintf(buf, sizeof(buf),
                    "%zu,%" PRId64 ",%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", n,
                    x[n].n, x[n].mean, x[n].variance(), s[n].mean, s[n].variance(), j[n].mean,
                    j[n].variance(), r[n].mean, r[n].variance());
    } else {
      std::snprintf(buf, sizeof(buf), "%zu,%" PRId64 ",%.17g,%.17g\n", n, x[n].n, x[n].mean,
                    x[n].variance());
    }
    os << buf;
  }
}

DecompositionState decompose_init(const Vector& x0) {
  DecompositionState st;
  st.s = LatticeVector::Zero(x0.size());
  st.j = LatticeVector::Zero(x0.size());
  st.r = x0;
  return st;
}

Vector step(const MapSpec& map, const Vector& x, double epsilon, const Vector& xi) {
  return map.apply(x) + epsilon * xi;
}

void decompose_update(const Vector& x_prev, const Vector& phi_prev, const Vector& x_next,
                      DecompositionState& state) {
  const Eigen::Index d = x_prev.size();
  for (Eigen::Index i = 0; i < d; ++i) {
    const std::int64_t fx = floor_coord(x_prev[i]);
    const std::int64_t fphi = floor_coord(phi_prev[i]);
    const std::int64_t fnext = floor_coord(x_next[i]);
    state.s[i] += fphi - fx;
    state.j[i] += fnext - fphi;
    state.r[i] = x_next[i] - static_cast<double>(state.s[i]) - static_cast<double>(state.j[i]);
  }
}

namespace {

struct BlockMoments {
  std::vector<Welford> x, s, j, r;
};

void sample_initial_1d(const CounterRng& rng, std::uint64_t path, const InitialDistribution& init,
                       double& x) {
  switch (init.kind) {
    case InitialDistribution::Kind::kPoint:
      x = init.point[0];
      break;
    case InitialDistribution::Kind::kUniformCube:
      x = rng.uniform_single(path, 0, DrawPurpose::kInitial, 0);
      break;
    case InitialDistribution::Kind::kGaussian:
      x = init.point[0] + init.sigma * rng.normal_single(path, 0, DrawPurpose::kInitial, 0);
      break;
  }
}

void sample_initial(const CounterRng& rng, std::uint64_t path, const InitialDistribution& init,
                    Vector& x) {
  const Eigen::Index d = x.size();
  switch (init.kind) {
    case InitialDistribution::Kind::kPoint:
      x = init.point;
      break;
    case InitialDistribution::Kind::kUniformCube:
      for (Eigen::Index i = 0; i < d; ++i) {
        const auto u = rng.uniform_pair(path, 0, DrawPurpose::kInitial,
                                        static_cast<std::uint32_t>(i / 2));
        x[i] = u[static_cast<std::size_t>(i % 2)];
      }
      break;
    case InitialDistribution::Kind::kGaussian:
      for (Eigen::Index i = 0; i < d; ++i) {
        const auto z = rng.normal_pair(path, 0, DrawPurpose::kInitial,
                                       static_cast<std::uint32_t>(i / 2));
        x[i] = init.point[i] + init.sigma * z[static_cast<std::size_t>(i % 2)];
      }
      break;
  }
}

// d == 1 kernel. All acceptance experiments live here, so this path avoids
// vector temporaries and the unused Box-Muller sine.
void run_block_1d(const SimulationConfig& cfg, const CounterRng& rng, std::int64_t path_begin,
                  std::int64_t path_end, BlockMoments& out) {
  const MapSpec& map = *cfg.map;
  const double v = cfg.direction[0];
  const double eps = cfg.epsilon;
  const auto n_steps = static_cast<std::uint32_t>(cfg.n_steps);
  const bool decomp = cfg.record_decomposition;

  for (std::int64_t p = path_begin; p < path_end; ++p) {
    const auto path = static_cast<std::uint64_t>(p);
    double x;
    sample_initial_1d(rng, path, cfg.initial, x);
    out.x[0].add(v * x);
    std::int64_t s_acc = 0, j_acc = 0;
    if (decomp) {
      out.s[0].add(0.0);
      out.j[0].add(0.0);
      out.r[0].add(v * x);
    }
    for (std::uint32_t n = 1; n <= n_steps; ++n) {
      const double phi = map.apply1(x);
      double xn = phi;
      if (eps != 0.0) xn += eps * rng.normal_single(path, n, DrawPurpose::kNoise, 0);
      out.x[n].add(v * xn);
      if (decomp) {
        const std::int64_t fx = floor_coord(x);
        const std::int64_t fphi = floor_coord(phi);
        const std::int64_t fnext = floor_coord(xn);
        s_acc += fphi - fx;
        j_acc += fnext - fphi;
        const double rrem = xn - static_cast<double>(s_acc) - static_cast<double>(j_acc);
        out.s[n].add(v * static_cast<double>(s_acc));
        out.j[n].add(v * static_cast<double>(j_acc));
        out.r[n].add(v * rrem);
      }
      x = xn;
    }
  }
}

void run_block_nd(const SimulationConfig& cfg, const CounterRng& rng, std::int64_t path_begin,
                  std::int64_t path_end, BlockMoments& out) {
  const MapSpec& map = *cfg.map;
  const Eigen::Index d = map.dimension();
  const Vector& v = cfg.direction;
  const double eps = cfg.epsilon;
  const auto n_steps = static_cast<std::uint32_t>(cfg.n_steps);
  const bool decomp = cfg.record_decomposition;
  const auto n_noise_blocks = static_cast<std::uint32_t>((d + 1) / 2);

  Vector x(d), phi(d), xn(d);
  LatticeVector s_acc(d), j_acc(d);

  for (std::int64_t p = path_begin; p < path_end; ++p) {
    const auto path = static_cast<std::uint64_t>(p);
    sample_initial(rng, path, cfg.initial, x);
    out.x[0].add(v.dot(x));
    s_acc.setZero();
    j_acc.setZero();
    if (decomp) {
      out.s[0].add(0.0);
      out.j[0].add(0.0);
      out.r[0].add(v.dot(x));
    }
    for (std::uint32_t n = 1; n <= n_steps; ++n) {
      phi = map.apply(x);
      xn = phi;
      if (eps != 0.0) {
        for (std::uint32_t b = 0; b < n_noise_blocks; ++b) {
          const auto z = rng.normal_pair(path, n, DrawPurpose::kNoise, b);
          xn[2 * b] += eps * z[0];
          if (static_cast<Eigen::Index>(2 * b + 1) < d) xn[2 * b + 1] += eps * z[1];
        }
      }
      out.x[n].add(v.dot(xn));
      if (decomp) {
        double vs = 0.0, vj = 0.0, vr = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
          s_acc[i] += floor_coord(phi[i]) - floor_coord(x[i]);
          j_acc[i] += floor_coord(xn[i]) - floor_coord(phi[i]);
          const double rrem =
              xn[i] - static_cast<double>(s_acc[i]) - static_cast<double>(j_acc[i]);
          vs += v[i] * static_cast<double>(s_acc[i]);
          vj += v[i] * static_cast<double>(j_acc[i]);
          vr += v[i] * rrem;
        }
        out.s[n].add(vs);
        out.j[n].add(vj);
        out.r[n].add(vr);
      }
      x = xn;
    }
  }
}

}  // namespace

EnsembleMoments simulate_ensemble(const SimulationConfig& cfg_in) {
  SimulationConfig cfg = cfg_in;
  cfg.validate_and_normalize();
  checked_step_count(cfg.n_steps);

  const auto n_blocks =
      static_cast<std::size_t>((cfg.n_paths + kPathBlock - 1) / kPathBlock);
  const std::size_t series_len = static_cast<std::size_t>(cfg.n_steps) + 1;
  const std::size_t series_per_block = cfg.record_decomposition ? 4 : 1;
  const std::size_t accumulator_bytes = n_blocks * series_len * series_per_block * sizeof(Welford);
  if (accumulator_bytes > (std::size_t{5} << 30) / 2)
    throw std::runtime_error(
        "simulate_ensemble: accumulator storage would exceed the memory budget (" +
        std::to_string(accumulator_bytes >> 20) + " MiB); reduce n_steps or n_paths");

  const CounterRng rng{cfg.seed};
  std::vector<BlockMoments> blocks(n_blocks);

  parallel_for_blocks(n_blocks, [&](std::size_t b) {
    BlockMoments& bm = blocks[b];
    bm.x.assign(series_len, Welford{});
    if (cfg.record_decomposition) {
      bm.s.assign(series_len, Welford{});
      bm.j.assign(series_len, Welford{});
      bm.r.assign(series_len, Welford{});
    }
    const std::int64_t begin = static_cast<std::int64_t>(b) * kPathBlock;
    const std::int64_t end = std::min<std::int64_t>(begin + kPathBlock, cfg.n_paths);
    if (cfg.map->dimension() == 1)
      run_block_1d(cfg, rng, begin, end, bm);
    else
      run_block_nd(cfg, rng, begin, end, bm);
  });

  // Deterministic reduction: block order only, regardless of thread count.
  EnsembleMoments out;
  out.n_steps = cfg.n_steps;
  out.count = cfg.n_paths;
  out.has_decomposition = cfg.record_decomposition;
  out.x.assign(series_len, Welford{});
  const auto n_batches = static_cast<std::size_t>(
      std::min<std::int64_t>(cfg.n_batches, static_cast<std::int64_t>(n_blocks)));
  out.batch_x.assign(n_batches, std::vector<Welford>(series_len));
  if (cfg.record_decomposition) {
    out.s.assign(series_len, Welford{});
    out.j.assign(series_len, Welford{});
    out.r.assign(series_len, Welford{});
    out.batch_s.assign(n_batches, std::vector<Welford>(series_len));
  }
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t batch = b % n_batches;
    for (std::size_t n = 0; n < series_len; ++n) {
      out.x[n].merge(blocks[b].x[n]);
      out.batch_x[batch][n].merge(blocks[b].x[n]);
      if (cfg.record_decomposition) {
        out.s[n].merge(blocks[b].s[n]);
        out.j[n].merge(blocks[b].j[n]);
        out.r[n].merge(blocks[b].r[n]);
        out.batch_s[batch][n].merge(blocks[b].s[n]);
      }
    }
    blocks[b] = BlockMoments{};  // release as we go
  }
  return out;
}

std::vector<RationalVector> noiseless_orbit(const MapSpec& map, const RationalVector& x0,
                                            std::int64_t n_steps,
                                            std::size_t max_denominator_bits) {
  if (x0.size() != map.dimension())
    throw std::invalid_argument("noiseless_orbit: dimension mismatch");
  if (n_steps < 0) throw std::invalid_argument("noiseless_orbit: n_steps must be >= 0");
  std::vector<RationalVector> orbit;
  orbit.reserve(static_cast<std::size_t>(n_steps) + 1);
  orbit.push_back(x0);
  for (std::int64_t n = 0; n < n_steps; ++n) {
    RationalVector next = map.apply(orbit.back());
    for (Eigen::Index i = 0; i < next.size(); ++i) {
      if (denominator_bits(next[i]) > max_denominator_bits)
        throw std::runtime_error(
            "noiseless_orbit: denominator exceeded " + std::to_string(max_denominator_bits) +
            " bits at step " + std::to_string(n + 1) + "; rerun with fewer steps");
    }
    orbit.push_back(std::move(next));
  }
  return orbit;
}

namespace {

InitialDistribution parse_initial(const std::string& text, Eigen::Index d) {
  if (text == "uniform_cube") return InitialDistribution::uniform_cube();
  auto parse_vec = [d](const std::string& body) {
    auto items = split_list(body);
    Vector v(d);
    if (items.size() == 1 && d > 1) {
      v.setConstant(std::stod(items[0]));
    } else {
      if (items.size() != static_cast<std::size_t>(d))
        throw ConfigError("initial: expected " + std::to_string(d) + " components");
      for (Eigen::Index i = 0; i < d; ++i) v[i] = std::stod(items[static_cast<std::size_t>(i)]);
    }
    return v;
  };
  if (text.rfind("point(", 0) == 0 && text.back() == ')')
    return InitialDistribution::point_mass(parse_vec(text.substr(6, text.size() - 7)));
  if (text.rfind("gaussian(", 0) == 0 && text.back() == ')') {
    const std::string body = text.substr(9, text.size() - 10);
    auto semi = body.find(';');
    if (semi == std::string::npos)
      throw ConfigError("initial: gaussian(<mean>; <sigma>) expected");
    return InitialDistribution::gaussian(parse_vec(body.substr(0, semi)),
                                         std::stod(body.substr(semi + 1)));
  }
  throw ConfigError("initial: unknown distribution '" + text + "'");
}

}  // namespace

SimulationConfig parse_simulation_config(const std::string& text) {
  ConfigDoc doc = parse_config_text(text, "sim/v1");
  SimulationConfig cfg;
  cfg.map = resolve_map(doc.root.require("map"));
  cfg.epsilon = config_double(doc.root, "epsilon");
  cfg.n_steps = config_int(doc.root, "n_steps");
  cfg.n_paths = config_int(doc.root, "n_paths");
  cfg.seed = static_cast<std::uint64_t>(config_int_or(doc.root, "seed", 0));
  cfg.record_decomposition = config_bool_or(doc.root, "record_decomposition", false);
  cfg.n_batches = static_cast<int>(config_int_or(doc.root, "n_batches", 16));
  const Eigen::Index d = cfg.map->dimension();
  if (const std::string* v = doc.root.find("v")) {
    auto items = split_list(*v);
    if (items.size() != static_cast<std::size_t>(d))
      throw ConfigError("v: expected " + std::to_string(d) + " components");
    cfg.direction.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) cfg.direction[i] = std::stod(items[static_cast<std::size_t>(i)]);
  }
  if (const std::string* init = doc.root.find("initial"))
    cfg.initial = parse_initial(*init, d);
  cfg.validate_and_normalize();
  return cfg;
}

SimulationConfig read_simulation_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_simulation_config(buf.str());
}

}  // namespace residual
