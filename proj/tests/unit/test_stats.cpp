#include <cmath>
#include <vector>

#include "doctest.h"
#include "rwre/error.hpp"
#include "rwre/rng.hpp"
#include "rwre/stats.hpp"

using namespace rwre;

TEST_CASE("sample mean and proportion") {
  const std::vector<double> x{1, 2, 3, 4};
  const auto e = sample_mean(x);
  CHECK(e.mean == 2.5);
  CHECK(e.stderr_ == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(sample_variance(x) == doctest::Approx(5.0 / 3.0));
  const auto p = proportion(0, 300);
  CHECK(p.mean == 0.0);
  CHECK(p.hi() == doctest::Approx(0.01));
  const auto q = proportion(30, 100);
  CHECK(q.stderr_ == doctest::Approx(std::sqrt(0.3 * 0.7 / 100)));
  const auto d = difference(e, q);
  CHECK(d.mean == doctest::Approx(2.2));
}

TEST_CASE("batch means covers the mean of iid data") {
  Rng rng(1);
  std::vector<double> x(64000);
  for (auto& v : x) v = rng.exponential();
  const auto b = batch_means(x);
  CHECK(b.covers(1.0));
  CHECK(b.stderr_ == doctest::Approx(1.0 / std::sqrt(64000.0)).epsilon(0.3));
}

TEST_CASE("permutation test separates independent and correlated data") {
  Rng rng(2);
  std::vector<double> iid(2000), ar(2000);
  double prev = 0.0;
  for (std::size_t i = 0; i < iid.size(); ++i) {
    iid[i] = rng.normal();
    prev = 0.5 * prev + rng.normal();
    ar[i] = prev;
  }
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i + 1 < iid.size(); ++i) starts.push_back(i);
  CHECK(permutation_test_lag1(iid, starts, 999, 3) > 0.01);
  CHECK(permutation_test_lag1(ar, starts, 999, 3) < 0.01);
  CHECK(lag1_correlation(ar, starts) == doctest::Approx(0.5).epsilon(0.15));
  CHECK_THROWS_AS(permutation_test_lag1(iid, std::vector<std::size_t>{0}, 10, 1), Error);
}

TEST_CASE("linear fit, chi-square and quantiles") {
  const std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
  const auto [slope, icept] = linear_fit(x, y);
  CHECK(slope == doctest::Approx(2.0));
  CHECK(icept == doctest::Approx(1.0));
  const std::vector<double> a{100, 100, 100}, b{100, 100, 100}, c{10, 100, 190};
  CHECK(two_sample_chi2_pvalue(a, b) == doctest::Approx(1.0));
  CHECK(two_sample_chi2_pvalue(a, c) < 1e-10);
  const std::vector<double> s{1, 2, 3, 4, 5};
  CHECK(quantile_sorted(s, 0.5) == 3.0);
  CHECK(quantile_sorted(s, 0.1) == doctest::Approx(1.4));
  CHECK(quantile_sorted(s, 1.0) == 5.0);
}
