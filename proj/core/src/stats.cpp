#include "rwre/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "rwre/error.hpp"
#include "rwre/rng.hpp"

namespace rwre {

Estimate sample_mean(std::span<const double> samples) {
  Estimate e;
  e.n = samples.size();
  if (samples.empty()) return e;
  e.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  if (samples.size() > 1)
    e.stderr_ = std::sqrt(sample_variance(samples) / static_cast<double>(samples.size()));
  return e;
}

Estimate batch_means(std::span<const double> samples, std::size_t batches) {
  const std::size_t n = samples.size();
  if (n < 4 * batches) return sample_mean(samples);
  Estimate e;
  e.n = n;
  e.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t begin = b * n / batches;
    const std::size_t end = (b + 1) * n / batches;
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += samples[i];
    means[b] = s / static_cast<double>(end - begin);
  }
  e.stderr_ = std::sqrt(sample_variance(means) / static_cast<double>(batches));
  return e;
}

Estimate proportion(std::uint64_t hits, std::uint64_t trials) {
  Estimate e;
  e.n = trials;
  if (trials == 0) return e;
  const double t = static_cast<double>(trials);
  e.mean = static_cast<double>(hits) / t;
  e.stderr_ = hits == 0 ? 1.0 / t : std::sqrt(e.mean * (1.0 - e.mean) / t);
  return e;
}

Estimate difference(const Estimate& a, const Estimate& b) {
  Estimate e;
  e.mean = a.mean - b.mean;
  e.stderr_ = std::hypot(a.stderr_, b.stderr_);
  e.n = std::min(a.n, b.n);
  return e;
}

double sample_variance(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) return 0.0;
  const double m = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  double s = 0.0;
  for (double v : samples) s += (v - m) * (v - m);
  return s / static_cast<double>(n - 1);
}

double lag1_correlation(std::span<const double> x, std::span<const std::size_t> pair_starts) {
  const double n = static_cast<double>(pair_starts.size());
  if (pair_starts.size() < 2) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (auto i : pair_starts) {
    ma += x[i];
    mb += x[i + 1];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (auto i : pair_starts) {
    const double a = x[i] - ma, b = x[i + 1] - mb;
    sab += a * b;
    saa += a * a;
    sbb += b * b;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double permutation_test_lag1(std::span<const double> x, std::span<const std::size_t> pair_starts,
                             std::size_t shuffles, std::uint64_t seed) {
  if (pair_starts.size() < 2) fail(ErrorKind::sample_size, "permutation test needs at least two pairs");
  const double observed = std::abs(lag1_correlation(x, pair_starts));
  std::vector<double> work(x.begin(), x.end());
  Rng rng(seed);
  std::size_t exceed = 0;
  for (std::size_t s = 0; s < shuffles; ++s) {
    for (std::size_t i = work.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
      std::swap(work[i], work[j]);
    }
    if (std::abs(lag1_correlation(work, pair_starts)) >= observed) ++exceed;
  }
  return (1.0 + static_cast<double>(exceed)) / (1.0 + static_cast<double>(shuffles));
}

std::pair<double, double> linear_fit(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  if (x.size() < 2) fail(ErrorKind::sample_size, "linear fit needs at least two points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

double two_sample_chi2_pvalue(std::span<const double> counts_a, std::span<const double> counts_b) {
  const double na = std::accumulate(counts_a.begin(), counts_a.end(), 0.0);
  const double nb = std::accumulate(counts_b.begin(), counts_b.end(), 0.0);
  double stat = 0.0;
  int bins = 0;
  for (std::size_t i = 0; i < counts_a.size(); ++i) {
    const double tot = counts_a[i] + counts_b[i];
    if (tot <= 0.0) continue;
    const double ea = tot * na / (na + nb);
    const double eb = tot * nb / (na + nb);
    stat += (counts_a[i] - ea) * (counts_a[i] - ea) / ea + (counts_b[i] - eb) * (counts_b[i] - eb) / eb;
    ++bins;
  }
  if (bins < 2) return 1.0;
  boost::math::chi_squared dist(bins - 1);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) fail(ErrorKind::sample_size, "quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace rwre
