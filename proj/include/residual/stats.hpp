#pragma once

#include <cstdint>
#include <vector>

namespace residual {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

LinearFit ols_fit(const std::vector<double>& xs, const std::vector<double>& ys);

double mean_of(const std::vector<double>& xs);
double sample_stddev(const std::vector<double>& xs);

// Upper-tail p-value of the chi-square distribution.
double chi_square_pvalue(double statistic, double dof);

// Pearson statistic of observed counts against uniform cell probabilities,
// returning the p-value.
double chi_square_uniform_pvalue(const std::vector<std::int64_t>& counts);

// One-sample Kolmogorov-Smirnov test against uniform [0,1); asymptotic
// p-value with the small-sample correction.
double ks_uniform_pvalue(std::vector<double> samples);

double normal_cdf(double z);
double normal_sf(double z);  // upper tail

}  // namespace residual
