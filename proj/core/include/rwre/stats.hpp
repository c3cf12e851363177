#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace rwre {

/// Point estimate with its standard error. Every Monte Carlo number in the
/// library is reported this way and compared at 3 standard errors.
struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;

  double lo(double k = 3.0) const { return mean - k * stderr_; }
  double hi(double k = 3.0) const { return mean + k * stderr_; }
  bool covers(double value, double k = 3.0) const {
    return value >= lo(k) && value <= hi(k);
  }
};

/// Batch-means estimate over samples kept in index order (32 batches when
/// there are enough samples, otherwise the plain standard error).
Estimate batch_means(std::span<const double> samples, std::size_t batches = 32);

/// Plain iid estimate.
Estimate sample_mean(std::span<const double> samples);

/// Binomial proportion with normal-approximation standard error. When there
/// are no hits the standard error is replaced by the rule-of-three bound / 3
/// so that hi() is 3/n.
Estimate proportion(std::uint64_t hits, std::uint64_t trials);

/// Difference a - b of independent estimates.
Estimate difference(const Estimate& a, const Estimate& b);

double sample_variance(std::span<const double> samples);

/// Pearson correlation of consecutive pairs (x[i], x[i+1]) for every i in
/// `pair_starts`.
double lag1_correlation(std::span<const double> x, std::span<const std::size_t> pair_starts);

/// Permutation test for lag-1 dependence. Values are pooled and shuffled;
/// the statistic is |lag-1 correlation| over the given pairs. Returns the
/// p-value (1 + #{perm >= observed}) / (1 + shuffles).
double permutation_test_lag1(std::span<const double> x, std::span<const std::size_t> pair_starts,
                             std::size_t shuffles, std::uint64_t seed);

/// Least-squares slope and intercept of y against x.
std::pair<double, double> linear_fit(std::span<const double> x, std::span<const double> y);

/// Chi-square homogeneity test for two histograms over the same bins.
/// Bins with zero total count are dropped; returns the p-value.
double two_sample_chi2_pvalue(std::span<const double> counts_a, std::span<const double> counts_b);

/// Empirical quantile (type 7, linear interpolation) of sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

}  // namespace rwre
