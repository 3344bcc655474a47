#include "residual/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "residual/parallel.hpp"
#include "residual/stats.hpp"
#include "residual/welford.hpp"

namespace residual {

namespace {

bool lattice_less(const LatticeVector& a, const LatticeVector& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return a[i] < b[i];
  return false;
}

RationalVector rationalize(const Vector& v) {
  RationalVector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = rational_from_double(v[i]);
  return out;
}

Vector normalized(const Vector& v) {
  const double n = v.norm();
  if (!(n > 0.0)) throw std::invalid_argument("direction must be nonzero");
  return v / n;
}

}  // namespace

Rational JumpLaw::total_probability() const {
  Rational t(0);
  for (const auto& [cube, p] : entries) t += p;
  return t;
}

std::optional<Rational> JumpLaw::probability(const LatticeVector& cube) const {
  for (const auto& [k, p] : entries)
    if (k == cube) return p;
  return std::nullopt;
}

JumpLaw exact_jump_law(const MapSpec& map) {
  const Eigen::Index d = map.dimension();
  std::map<std::vector<std::int64_t>, Rational> tally;
  for (const auto& piece : map.pieces()) {
    const auto img = piece.image_box();
    if (!img)
      throw std::runtime_error(
          "exact_jump_law: piece image is not axis-aligned; exact integration unsupported");
    const Rational inv_det = Rational(1) / abs(piece.determinant());
    LatticeVector klo(d), khi(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      klo[i] = floor_rational(img->lo[i]).convert_to<std::int64_t>();
      BigInt h = floor_rational(img->hi[i]);
      if (Rational(h) == img->hi[i]) --h;
      khi[i] = h.convert_to<std::int64_t>();
    }
    LatticeVector k = klo;
    while (true) {
      Box cube;
      cube.lo.resize(d);
      cube.hi.resize(d);
      for (Eigen::Index i = 0; i < d; ++i) {
        cube.lo[i] = Rational(k[i]);
        cube.hi[i] = Rational(k[i] + 1);
      }
      if (auto sub = intersect(*img, cube)) {
        std::vector<std::int64_t> key(k.data(), k.data() + d);
        tally[key] += sub->volume() * inv_det;
      }
      Eigen::Index axis = 0;
      for (; axis < d; ++axis) {
        if (++k[axis] <= khi[axis]) break;
        k[axis] = klo[axis];
      }
      if (axis == d) break;
    }
  }

  JumpLaw law;
  for (const auto& [key, p] : tally) {
    if (p == 0) continue;
    LatticeVector k(d);
    for (Eigen::Index i = 0; i < d; ++i) k[i] = key[static_cast<std::size_t>(i)];
    law.entries.emplace_back(std::move(k), p);
  }
  std::sort(law.entries.begin(), law.entries.end(),
            [](const auto& a, const auto& b) { return lattice_less(a.first, b.first); });
  return law;
}

double theoretical_asyvar(const MapSpec& map, const Vector& v) {
  const JumpLaw law = exact_jump_law(map);
  const RationalVector vr = rationalize(normalized(v));
  Rational mean(0), second(0);
  for (const auto& [cube, p] : law.entries) {
    Rational dot(0);
    for (Eigen::Index i = 0; i < vr.size(); ++i) dot += vr[i] * Rational(cube[i]);
    mean += p * dot;
    second += p * dot * dot;
  }
  return to_double(second - mean * mean);
}

AsyVarEstimate asyvar_fit(const EnsembleMoments& moments, double window_fraction) {
  if (!(window_fraction > 0.0 && window_fraction < 1.0))
    throw std::invalid_argument("asyvar_fit: window_fraction must lie in (0, 1)");
  const std::int64_t N = moments.n_steps;
  const auto n_lo =
      static_cast<std::int64_t>(std::ceil(window_fraction * static_cast<double>(N)));
  if (N - n_lo + 1 < 10)
    throw std::invalid_argument("asyvar_fit: window has fewer than 10 points");

  std::vector<double> xs, ys;
  xs.reserve(static_cast<std::size_t>(N - n_lo + 1));
  for (std::int64_t n = n_lo; n <= N; ++n) {
    xs.push_back(static_cast<double>(n));
    ys.push_back(moments.x[static_cast<std::size_t>(n)].variance());
  }

  AsyVarEstimate est;
  est.slope = ols_fit(xs, ys).slope;
  est.n_lo = n_lo;
  est.n_hi = N;
  est.method = "ols+batch-means";

  std::vector<double> batch_slopes;
  for (const auto& batch : moments.batch_x) {
    std::vector<double> bys;
    bys.reserve(xs.size());
    for (std::int64_t n = n_lo; n <= N; ++n)
      bys.push_back(batch[static_cast<std::size_t>(n)].variance());
    batch_slopes.push_back(ols_fit(xs, bys).slope);
  }
  if (batch_slopes.size() >= 2)
    est.stderr_ =
        sample_stddev(batch_slopes) / std::sqrt(static_cast<double>(batch_slopes.size()));
  return est;
}

// ---------------------------------------------------------------------------
// Green-Kubo partial sums over exact orbits
// ---------------------------------------------------------------------------

GreenKuboResult green_kubo(const MapSpec& map, const Vector& v, int n_max, int grid_size,
                           double negligible_tol) {
  if (n_max < 0) throw std::invalid_argument("green_kubo: n_max must be >= 0");
  if (grid_size < 2) throw std::invalid_argument("green_kubo: grid_size must be >= 2");
  const Eigen::Index d = map.dimension();
  double total_points = std::pow(static_cast<double>(grid_size), static_cast<double>(d));
  if (total_points > static_cast<double>(1 << 22))
    throw std::invalid_argument("green_kubo: grid has too many points; reduce grid_size");

  const RationalVector vr = rationalize(normalized(v));
  const auto lags = static_cast<std::size_t>(n_max) + 1;

  std::vector<Rational> sum_w(lags, Rational(0)), sum_w0w(lags, Rational(0));
  std::vector<Rational> sum_f(lags, Rational(0)), sum_f0f(lags, Rational(0));

  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  std::int64_t count = 0;
  while (true) {
    RationalVector x0(d);
    for (Eigen::Index i = 0; i < d; ++i)
      x0[i] = Rational(2 * idx[static_cast<std::size_t>(i)] + 1, 2 * grid_size);
    const auto orbit = noiseless_orbit(map, x0, n_max + 1);

    std::vector<Rational> w(lags), f(lags);
    for (std::size_t n = 0; n < lags; ++n) {
      Rational wn(0), fn(0);
      for (Eigen::Index i = 0; i < d; ++i) {
        wn += vr[i] * (orbit[n + 1][i] - orbit[n][i]);
        fn += vr[i] * Rational(floor_rational(orbit[n + 1][i]) - floor_rational(orbit[n][i]));
      }
      w[n] = std::move(wn);
      f[n] = std::move(fn);
    }
    for (std::size_t n = 0; n < lags; ++n) {
      sum_w[n] += w[n];
      sum_w0w[n] += w[0] * w[n];
      sum_f[n] += f[n];
      sum_f0f[n] += f[0] * f[n];
    }
    ++count;

    Eigen::Index axis = 0;
    for (; axis < d; ++axis) {
      if (++idx[static_cast<std::size_t>(axis)] < grid_size) break;
      idx[static_cast<std::size_t>(axis)] = 0;
    }
    if (axis == d) break;
  }

  const Rational n_rat(count);
  GreenKuboResult out;
  out.grid_size = grid_size;
  out.increment_cov.resize(lags);
  out.jump_cov.resize(lags);
  for (std::size_t n = 0; n < lags; ++n) {
    const Rational cov_w = sum_w0w[n] / n_rat - (sum_w[0] / n_rat) * (sum_w[n] / n_rat);
    const Rational cov_f = sum_f0f[n] / n_rat - (sum_f[0] / n_rat) * (sum_f[n] / n_rat);
    out.increment_cov[n] = to_double(cov_w);
    out.jump_cov[n] = to_double(cov_f);
  }
  out.partial_sums.resize(lags);
  out.partial_sums[0] = out.increment_cov[0];
  for (std::size_t k = 1; k < lags; ++k)
    out.partial_sums[k] = out.partial_sums[k - 1] + 2.0 * out.increment_cov[k];

  for (std::size_t n = 1; n + 2 < lags + 0; ++n) {
    if (std::abs(out.increment_cov[n]) <= negligible_tol &&
        std::abs(out.increment_cov[n + 1]) <= negligible_tol &&
        std::abs(out.increment_cov[n + 2]) <= negligible_tol) {
      out.first_negligible_lag = static_cast<int>(n);
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Correlation decay on the torus
// ---------------------------------------------------------------------------

CorrelationDecayResult correlation_decay(const MapSpec& map, const TorusFunction& f,
                                         const TorusFunction& g, int n_max,
                                         int grid_points_per_axis, double noise_floor) {
  if (n_max < 0 || n_max > 30)
    throw std::invalid_argument("correlation_decay: n_max must lie in [0, 30]");
  const Eigen::Index d = map.dimension();
  const int G = grid_points_per_axis;
  const double total = std::pow(static_cast<double>(G), static_cast<double>(d));
  if (total > static_cast<double>(1 << 22))
    throw std::invalid_argument("correlation_decay: grid too large");
  const auto n_points = static_cast<std::size_t>(total);

  std::vector<RationalVector> points(n_points);
  std::vector<double> f_vals(n_points);
  {
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    for (std::size_t p = 0; p < n_points; ++p) {
      RationalVector x(d);
      for (Eigen::Index i = 0; i < d; ++i)
        x[i] = Rational(2 * idx[static_cast<std::size_t>(i)] + 1, 2 * G);
      f_vals[p] = f(to_double(x));
      points[p] = std::move(x);
      Eigen::Index axis = 0;
      for (; axis < d; ++axis) {
        if (++idx[static_cast<std::size_t>(axis)] < G) break;
        idx[static_cast<std::size_t>(axis)] = 0;
      }
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n_points);
  double mean_f = 0.0;
  for (double x : f_vals) mean_f += x;
  mean_f *= inv_n;

  CorrelationDecayResult out;
  out.noise_floor = noise_floor;
  out.c.reserve(static_cast<std::size_t>(n_max) + 1);
  for (int n = 0; n <= n_max; ++n) {
    double mean_g = 0.0, mean_fg = 0.0;
    for (std::size_t p = 0; p < n_points; ++p) {
      const double gv = g(to_double(points[p]));
      mean_g += gv;
      mean_fg += f_vals[p] * gv;
    }
    mean_g *= inv_n;
    mean_fg *= inv_n;
    out.c.push_back(std::abs(mean_fg - mean_f * mean_g));
    if (n < n_max)
      for (auto& x : points) x = project_torus(map.apply(x));
  }

  // Fit the exponential rate over the initial run of usable lags.
  std::vector<double> xs, ys;
  for (int n = 1; n <= n_max; ++n) {
    const double c = out.c[static_cast<std::size_t>(n)];
    if (c <= 10.0 * noise_floor) break;
    xs.push_back(static_cast<double>(n));
    ys.push_back(std::log(c));
  }
  out.fit_lo = 1;
  out.fit_hi = static_cast<int>(xs.size());
  if (xs.size() >= 2) out.gamma_hat = -ols_fit(xs, ys).slope;
  return out;
}

// ---------------------------------------------------------------------------
// Jump-moment and decorrelation diagnostics
// ---------------------------------------------------------------------------

MomentEstimate delta_moment(const MapSpec& map, double epsilon, double p,
                            std::int64_t n_samples, std::uint64_t seed) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("delta_moment: epsilon must be >= 0");
  if (n_samples < 1) throw std::invalid_argument("delta_moment: n_samples must be >= 1");
  const Eigen::Index d = map.dimension();
  const CounterRng rng{seed};

  constexpr std::int64_t kBlock = 1 << 16;
  const auto n_blocks = static_cast<std::size_t>((n_samples + kBlock - 1) / kBlock);
  std::vector<Welford> blocks(n_blocks);

  parallel_for_blocks(n_blocks, [&](std::size_t b) {
    Welford acc;
    Vector u(d), phi(d), noisy(d);
    const std::int64_t begin = static_cast<std::int64_t>(b) * kBlock;
    const std::int64_t end = std::min<std::int64_t>(begin + kBlock, n_samples);
    for (std::int64_t i = begin; i < end; ++i) {
      const auto path = static_cast<std::uint64_t>(i);
      for (Eigen::Index k = 0; k < d; ++k) {
        const auto uu =
            rng.uniform_pair(path, 0, DrawPurpose::kGeneric, static_cast<std::uint32_t>(k / 2));
        u[k] = uu[static_cast<std::size_t>(k % 2)];
      }
      phi = map.apply(u);
      noisy = phi;
      if (epsilon != 0.0) {
        for (Eigen::Index k = 0; k < d; k += 2) {
          const auto z =
              rng.normal_pair(path, 1, DrawPurpose::kGeneric, static_cast<std::uint32_t>(k / 2));
          noisy[k] += epsilon * z[0];
          if (k + 1 < d) noisy[k + 1] += epsilon * z[1];
        }
      }
      double sq = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const auto delta = static_cast<double>(floor_coord(noisy[k]) - floor_coord(phi[k]));
        sq += delta * delta;
      }
      acc.add(std::pow(std::sqrt(sq), p));
    }
    blocks[b] = acc;
  });

  Welford total;
  for (const auto& b : blocks) total.merge(b);
  MomentEstimate est;
  est.value = total.mean;
  est.n_samples = total.n;
  est.stderr_ = total.n > 1 ? total.stddev() / std::sqrt(static_cast<double>(total.n)) : 0.0;
  return est;
}

namespace {

using PairCounts = std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t>;

IndependenceResult independence_from_counts(const PairCounts& counts, int lag) {
  IndependenceResult res;
  res.lag = lag;

  std::map<std::int64_t, std::int64_t> row_marg, col_marg;
  std::int64_t total = 0;
  for (const auto& [key, c] : counts) {
    row_marg[key.first] += c;
    col_marg[key.second] += c;
    total += c;
  }
  res.n_pairs = total;
  if (total == 0) throw std::invalid_argument("independence test: no pairs");

  // Categories shared across both margins (the increments live in one space).
  std::map<std::int64_t, std::int64_t> marg;
  for (const auto& [k, c] : row_marg) marg[k] += c;
  for (const auto& [k, c] : col_marg) marg[k] += c;

  // Coarsen: merge the rarest categories until the smallest expected cell
  // count reaches 5. Merged categories share a bucket id.
  std::vector<std::pair<std::int64_t, std::int64_t>> cats(marg.begin(), marg.end());
  std::sort(cats.begin(), cats.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  std::map<std::int64_t, std::int64_t> bucket;
  for (const auto& [k, c] : cats) bucket[k] = k;
  auto min_expected = [&]() {
    std::map<std::int64_t, std::int64_t> rm, cm;
    for (const auto& [key, c] : counts) {
      rm[bucket[key.first]] += c;
      cm[bucket[key.second]] += c;
    }
    double min_e = std::numeric_limits<double>::infinity();
    for (const auto& [r, rc] : rm)
      for (const auto& [cl, cc] : cm)
        min_e = std::min(min_e, static_cast<double>(rc) * static_cast<double>(cc) /
                                    static_cast<double>(total));
    return min_e;
  };
  std::size_t merged = 0;
  while (min_expected() < 5.0) {
    // Distinct surviving buckets, rarest first.
    std::map<std::int64_t, std::int64_t> bucket_mass;
    for (const auto& [k, c] : marg) bucket_mass[bucket[k]] += c;
    if (bucket_mass.size() <= 2)
      throw std::runtime_error(
          "independence test: fewer than 5 expected counts per cell even after coarsening");
    std::vector<std::pair<std::int64_t, std::int64_t>> order(bucket_mass.begin(),
                                                             bucket_mass.end());
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    const std::int64_t from = order[0].first, into = order[1].first;
    for (auto& [k, b] : bucket)
      if (b == from) b = into;
    ++merged;
  }
  res.coarsened = merged > 0;

  std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> joint;
  std::map<std::int64_t, std::int64_t> rm, cm;
  for (const auto& [key, c] : counts) {
    joint[{bucket[key.first], bucket[key.second]}] += c;
    rm[bucket[key.first]] += c;
    cm[bucket[key.second]] += c;
  }
  double stat = 0.0;
  for (const auto& [r, rc] : rm) {
    for (const auto& [cl, cc] : cm) {
      const double expected = static_cast<double>(rc) * static_cast<double>(cc) /
                              static_cast<double>(total);
      auto it = joint.find({r, cl});
      const double observed = it == joint.end() ? 0.0 : static_cast<double>(it->second);
      stat += (observed - expected) * (observed - expected) / expected;
    }
  }
  res.statistic = stat;
  res.dof = static_cast<std::int64_t>((rm.size() - 1) * (cm.size() - 1));
  res.p_value = chi_square_pvalue(stat, static_cast<double>(res.dof));
  return res;
}

std::int64_t encode_lattice(const LatticeVector& k) {
  // d = 1 dominates; higher dimensions pack small offsets into one word.
  std::int64_t code = 0;
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    if (k[i] < -1000000 || k[i] > 1000000)
      throw std::runtime_error("increment_independence: jump out of packable range");
    code = code * 2000003 + (k[i] + 1000001);
  }
  return code;
}

}  // namespace

IndependenceResult independence_test_pairs(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& pairs, int lag) {
  PairCounts counts;
  for (const auto& p : pairs) ++counts[p];
  return independence_from_counts(counts, lag);
}

std::vector<IndependenceResult> increment_independence(const MapSpec& map, double epsilon,
                                                       std::int64_t n_steps,
                                                       std::int64_t n_paths, std::uint64_t seed,
                                                       const std::vector<int>& lags) {
  if (n_steps < 2) throw std::invalid_argument("increment_independence: need n_steps >= 2");
  const Eigen::Index d = map.dimension();
  const CounterRng rng{seed};

  std::vector<PairCounts> counts(lags.size());
  Vector x(d), phi(d);
  std::vector<std::int64_t> jumps(static_cast<std::size_t>(n_steps));
  for (std::int64_t p = 0; p < n_paths; ++p) {
    const auto path = static_cast<std::uint64_t>(p);
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto u =
          rng.uniform_pair(path, 0, DrawPurpose::kInitial, static_cast<std::uint32_t>(i / 2));
      x[i] = u[static_cast<std::size_t>(i % 2)];
    }
    for (std::int64_t t = 0; t < n_steps; ++t) {
      phi = map.apply(x);
      LatticeVector jump(d);
      for (Eigen::Index i = 0; i < d; ++i) jump[i] = floor_coord(phi[i]) - floor_coord(x[i]);
      jumps[static_cast<std::size_t>(t)] = encode_lattice(jump);
      x = phi;
      if (epsilon != 0.0) {
        for (Eigen::Index i = 0; i < d; i += 2) {
          const auto z = rng.normal_pair(path, static_cast<std::uint32_t>(t + 1),
                                         DrawPurpose::kNoise, static_cast<std::uint32_t>(i / 2));
          x[i] += epsilon * z[0];
          if (i + 1 < d) x[i + 1] += epsilon * z[1];
        }
      }
    }
    for (std::size_t li = 0; li < lags.size(); ++li) {
      const auto lag = static_cast<std::int64_t>(lags[li]);
      // Non-overlapping index pairs: i.i.d. under the null hypothesis.
      for (std::int64_t t = 0; t + lag < n_steps; t += 2 * lag)
        ++counts[li][{jumps[static_cast<std::size_t>(t)],
                      jumps[static_cast<std::size_t>(t + lag)]}];
    }
  }

  std::vector<IndependenceResult> out;
  for (std::size_t li = 0; li < lags.size(); ++li)
    out.push_back(independence_from_counts(counts[li], lags[li]));
  return out;
}

// ---------------------------------------------------------------------------
// Subgaussian scale fit
// ---------------------------------------------------------------------------

namespace {

double psi2_moment(const std::vector<double>& ys, double c) {
  double sum = 0.0;
  const double inv_c2 = 1.0 / (c * c);
  for (double y : ys) sum += std::exp(std::min(y * y * inv_c2, 700.0));
  return sum / static_cast<double>(ys.size());
}

double psi2_bisect(const std::vector<double>& ys, bool* upper_bound_only) {
  double max_abs = 0.0, rms = 0.0;
  for (double y : ys) {
    max_abs = std::max(max_abs, std::abs(y));
    rms += y * y;
  }
  rms = std::sqrt(rms / static_cast<double>(ys.size()));
  if (max_abs == 0.0) return 0.0;

  double hi = std::max(rms, max_abs / 26.0);  // exp cap kicks in near max/26.5
  int guard = 0;
  while (psi2_moment(ys, hi) > 2.0) {
    hi *= 2.0;
    if (++guard > 200) {
      if (upper_bound_only) *upper_bound_only = true;
      return hi;
    }
  }
  double lo = hi / 2.0;
  guard = 0;
  while (psi2_moment(ys, lo) < 2.0) {
    hi = lo;
    lo /= 2.0;
    if (++guard > 2000) break;
  }
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (psi2_moment(ys, mid) > 2.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Psi2Fit tail_diagnostic(const std::vector<double>& samples, std::uint64_t seed,
                        int n_bootstrap) {
  if (samples.empty()) throw std::invalid_argument("tail_diagnostic: empty sample");

  // Winsorize the top 0.01% for stability.
  std::vector<double> ys(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) ys[i] = std::abs(samples[i]);
  std::vector<double> sorted = ys;
  std::sort(sorted.begin(), sorted.end());
  const auto cap_idx = static_cast<std::size_t>(
      std::floor(0.9999 * static_cast<double>(sorted.size() - 1)));
  const double cap = sorted[cap_idx];
  if (cap > 0.0)
    for (auto& y : ys) y = std::min(y, cap);

  Psi2Fit fit;
  fit.c = psi2_bisect(ys, &fit.upper_bound_only);
  if (n_bootstrap >= 2 && fit.c > 0.0) {
    const CounterRng rng{seed};
    std::vector<double> cs;
    std::vector<double> resample(ys.size());
    for (int b = 0; b < n_bootstrap; ++b) {
      for (std::size_t i = 0; i < ys.size(); ++i) {
        const double u = rng.uniform_single(static_cast<std::uint64_t>(b),
                                            static_cast<std::uint32_t>(i),
                                            DrawPurpose::kGeneric, 0);
        resample[i] = ys[static_cast<std::size_t>(u * static_cast<double>(ys.size()))];
      }
      cs.push_back(psi2_bisect(resample, nullptr));
    }
    fit.stderr_ = sample_stddev(cs) / std::sqrt(static_cast<double>(n_bootstrap));
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Decorrelation of the noise-induced jumps
// ---------------------------------------------------------------------------

std::vector<LagCovariance> covj_decay(const MapSpec& map, double epsilon, int m_fixed, int n_max,
                                      std::int64_t n_paths, const Vector& v, std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("covj_decay: epsilon must be > 0");
  if (m_fixed < 0 || n_max < 0) throw std::invalid_argument("covj_decay: negative index");
  const Eigen::Index d = map.dimension();
  const Vector vn = normalized(v);
  const CounterRng rng{seed};

  const int record_from = m_fixed;
  const int record_to = m_fixed + n_max + 1;  // inclusive
  const auto n_lagged = static_cast<std::size_t>(n_max) + 1;

  constexpr std::int64_t kBlock = 1 << 14;
  const auto n_blocks = static_cast<std::size_t>((n_paths + kBlock - 1) / kBlock);
  struct BlockSums {
    std::vector<double> sum_a, sum_b, sum_ab;
    std::int64_t count = 0;
  };
  std::vector<BlockSums> blocks(n_blocks);

  parallel_for_blocks(n_blocks, [&](std::size_t bi) {
    BlockSums bs;
    bs.sum_a.assign(1, 0.0);
    bs.sum_b.assign(n_lagged, 0.0);
    bs.sum_ab.assign(n_lagged, 0.0);
    Vector x(d), phi(d);
    std::vector<double> deltas(static_cast<std::size_t>(record_to - record_from) + 1);
    const std::int64_t begin = static_cast<std::int64_t>(bi) * kBlock;
    const std::int64_t end = std::min<std::int64_t>(begin + kBlock, n_paths);
    for (std::int64_t p = begin; p < end; ++p) {
      const auto path = static_cast<std::uint64_t>(p);
      for (Eigen::Index i = 0; i < d; ++i) {
        const auto u =
            rng.uniform_pair(path, 0, DrawPurpose::kInitial, static_cast<std::uint32_t>(i / 2));
        x[i] = u[static_cast<std::size_t>(i % 2)];
      }
      for (int t = 0; t <= record_to; ++t) {
        phi = map.apply(x);
        Vector xn = phi;
        for (Eigen::Index i = 0; i < d; i += 2) {
          const auto z = rng.normal_pair(path, static_cast<std::uint32_t>(t + 1),
                                         DrawPurpose::kNoise, static_cast<std::uint32_t>(i / 2));
          xn[i] += epsilon * z[0];
          if (i + 1 < d) xn[i + 1] += epsilon * z[1];
        }
        if (t >= record_from) {
          double delta = 0.0;
          for (Eigen::Index i = 0; i < d; ++i)
            delta += vn[i] * static_cast<double>(floor_coord(xn[i]) - floor_coord(phi[i]));
          deltas[static_cast<std::size_t>(t - record_from)] = delta;
        }
        x = xn;
      }
      const double a = deltas[0];
      bs.sum_a[0] += a;
      for (std::size_t n = 0; n < n_lagged; ++n) {
        const double b = deltas[n + 1];
        bs.sum_b[n] += b;
        bs.sum_ab[n] += a * b;
      }
      ++bs.count;
    }
    blocks[bi] = std::move(bs);
  });

  // Overall covariance from pooled sums; stderr from batch means over blocks.
  std::vector<LagCovariance> out(n_lagged);
  const auto n_batches = std::min<std::size_t>(16, n_blocks);
  for (std::size_t n = 0; n < n_lagged; ++n) {
    double sa = 0, sb = 0, sab = 0;
    std::int64_t total = 0;
    std::vector<double> batch_cov(n_batches, 0.0);
    std::vector<double> batch_sa(n_batches, 0.0), batch_sb(n_batches, 0.0),
        batch_sab(n_batches, 0.0);
    std::vector<std::int64_t> batch_n(n_batches, 0);
    for (std::size_t b = 0; b < n_blocks; ++b) {
      sa += blocks[b].sum_a[0];
      sb += blocks[b].sum_b[n];
      sab += blocks[b].sum_ab[n];
      total += blocks[b].count;
      const std::size_t batch = b % n_batches;
      batch_sa[batch] += blocks[b].sum_a[0];
      batch_sb[batch] += blocks[b].sum_b[n];
      batch_sab[batch] += blocks[b].sum_ab[n];
      batch_n[batch] += blocks[b].count;
    }
    const auto tn = static_cast<double>(total);
    out[n].lag = static_cast<int>(n);
    out[n].cov = sab / tn - (sa / tn) * (sb / tn);
    for (std::size_t batch = 0; batch < n_batches; ++batch) {
      const auto bn = static_cast<double>(batch_n[batch]);
      if (bn > 0)
        batch_cov[batch] =
            batch_sab[batch] / bn - (batch_sa[batch] / bn) * (batch_sb[batch] / bn);
    }
    if (n_batches >= 2)
      out[n].stderr_ = sample_stddev(batch_cov) / std::sqrt(static_cast<double>(n_batches));
  }
  return out;
}

}  // namespace residual
