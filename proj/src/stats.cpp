#include "residual/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace residual {

LinearFit ols_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("ols_fit: need at least two matched points");
  const auto n = static_cast<double>(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("ols_fit: degenerate abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double sample_stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

double chi_square_pvalue(double statistic, double dof) {
  if (dof <= 0) throw std::invalid_argument("chi_square_pvalue: dof must be positive");
  if (statistic <= 0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, statistic / 2.0);
}

double chi_square_uniform_pvalue(const std::vector<std::int64_t>& counts) {
  if (counts.size() < 2) throw std::invalid_argument("chi_square_uniform_pvalue: need >= 2 cells");
  std::int64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw std::invalid_argument("chi_square_uniform_pvalue: empty sample");
  const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  double stat = 0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  return chi_square_pvalue(stat, static_cast<double>(counts.size() - 1));
}

double ks_uniform_pvalue(std::vector<double> samples) {
  if (samples.empty()) throw std::invalid_argument("ks_uniform_pvalue: empty sample");
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double d_stat = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double u = samples[i];
    const double hi = (static_cast<double>(i) + 1.0) / n - u;
    const double lo = u - static_cast<double>(i) / n;
    d_stat = std::max({d_stat, hi, lo});
  }
  // Stephens' corrected asymptotic tail of the Kolmogorov distribution.
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d_stat;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    p += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / 1.4142135623730950488); }

double normal_sf(double z) { return 0.5 * std::erfc(z / 1.4142135623730950488); }

}  // namespace residual
