#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hmmlab {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
inline double normal_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = a > b ? a : b;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double log_sum_exp(std::span<const double> values);

double mean(std::span<const double> values);
double variance(std::span<const double> values);  // unbiased
double standard_error(std::span<const double> values);

// Monte Carlo s.e. for a binomial frequency estimate.
inline double binomial_se(double p_hat, std::size_t n) {
  return std::sqrt(std::max(p_hat * (1.0 - p_hat), 0.0) / static_cast<double>(n));
}

// s.e. of a correlated-chain mean via nonoverlapping batch means.
double batch_means_se(std::span<const double> chain, int batches = 30);

// Gelman-Rubin potential scale reduction, max over coordinates.
// Each chain is an (iterations x dim) matrix; chains must have equal sizes.
double gelman_rubin(const std::vector<Eigen::MatrixXd>& chains);

// Half L1 distance between two empirical laws on a shared histogram
// (Freedman-Diaconis widths from the pooled sample). 1-D only.
double tv_between_samples(std::span<const double> a, std::span<const double> b);

double freedman_diaconis_width(std::span<const double> sorted_values);

// OLS slope of y against x.
double ols_slope(std::span<const double> x, std::span<const double> y);

std::uint64_t fnv1a64(std::string_view bytes);

// Shortest decimal form that parses back to the same double; used for all
// numeric file output so re-runs are byte-identical.
std::string format_double(double value);

}  // namespace hmmlab
