#include <cmath>
#include <memory>
#include <numeric>

#include <Eigen/Dense>

#include "doctest.h"
#include "rwre/error.hpp"
#include "rwre/regeneration.hpp"

using namespace rwre;

namespace {

PathRecord path_from(int dim, const std::vector<MoveCode>& moves, const std::vector<std::uint8_t>& bits, double kappa) {
  PathRecord p(dim, origin());
  for (auto m : moves) p.push(m);
  p.coins = CoinStream{0, dim * kappa, bits};
  return p;
}

// Definitional L-regeneration oracle: every R o theta_S is evaluated with
// stopping_R on an explicit copy of the shifted path.
PathRecord shifted(const PathRecord& p, std::size_t from) {
  PathRecord q(p.dim(), p.position(from));
  std::vector<std::uint8_t> bits;
  for (std::size_t n = from; n < p.length(); ++n) {
    q.push(p.moves()[n]);
    bits.push_back(p.coins->bits[n]);
  }
  q.coins = CoinStream{p.coins->seed, p.coins->prob, bits};
  return q;
}

std::optional<std::size_t> naive_tau1(const PathRecord& p, int L, double c5) {
  const auto pos = p.positions();
  const std::size_t H = p.length();
  std::size_t r = 0;
  for (;;) {
    std::optional<std::size_t> S;
    for (std::size_t n = std::max<std::size_t>(r, static_cast<std::size_t>(L)); n <= H && !S; ++n) {
      bool ok = true;
      for (std::size_t m = 0; m < n - L; ++m) ok = ok && pos[n - L][0] > pos[m][0];
      for (int i = 1; i <= L && ok; ++i)
        ok = p.coins->bits[n - i] == 1 && p.moves()[n - i] == move_code(0, 1);
      if (ok) S = n;
    }
    if (!S) return std::nullopt;
    const auto R = stopping_R(shifted(p, *S), c5);
    if (!R) return S;
    r = *S + *R;
  }
}

std::vector<std::size_t> naive_L(const PathRecord& p, int L, double c5) {
  std::vector<std::size_t> out;
  std::size_t base = 0;
  for (;;) {
    const auto t = naive_tau1(shifted(p, base), L, c5);
    if (!t) return out;
    base += *t;
    out.push_back(base);
  }
}

std::shared_ptr<Environment> drifted_srw(int dim, double lambda) {
  PerturbationParams pp;
  pp.lambda = lambda;
  return std::make_shared<PerturbedEnvironment>(std::make_shared<ModelEnvironment>(EnvironmentModel::simple(dim)), pp);
}

}  // namespace

TEST_CASE("straight path with all coins one regenerates every L steps") {
  const std::vector<MoveCode> moves(20, move_code(0, 1));
  const auto p = path_from(2, moves, std::vector<std::uint8_t>(20, 1), 0.1);
  LRegenConfig cfg;
  cfg.L = 3;
  const auto seq = detect_L_regenerations(p, cfg);
  REQUIRE(seq.size() == 6);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    CHECK(seq.records[k].tau == 3 * (k + 1));
    CHECK(seq.records[k].x[0] == static_cast<std::int64_t>(3 * (k + 1)));
  }
}

TEST_CASE("backtracking path has no L-regeneration") {
  std::vector<MoveCode> moves;
  for (int i = 0; i < 10; ++i) {
    moves.push_back(move_code(0, 1));
    moves.push_back(move_code(0, -1));
  }
  const auto p = path_from(2, moves, std::vector<std::uint8_t>(20, 1), 0.1);
  LRegenConfig cfg;
  cfg.L = 1;
  CHECK(detect_L_regenerations(p, cfg).size() == 0);
}

TEST_CASE("missing coins are an input mismatch") {
  PathRecord p(2, origin());
  p.push(move_code(0, 1));
  LRegenConfig cfg;
  CHECK_THROWS_AS(detect_L_regenerations(p, cfg), Error);
  try {
    detect_L_regenerations(p, cfg);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::input_mismatch);
  }
}

TEST_CASE("L-regenerations agree with the definitional oracle") {
  const auto env = drifted_srw(2, 0.5);
  int found = 0;
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    Rng rng(seed);
    const auto p = simulate_with_coins(*env, 0.1, origin(), 250, rng, seed + 1000);
    for (int L : {1, 2}) {
      for (double c5 : {1.0, 2.0, 50.0}) {
        LRegenConfig cfg;
        cfg.L = L;
        cfg.c5 = c5;
        const auto seq = detect_L_regenerations(p, cfg);
        const auto oracle = naive_L(p, L, c5);
        REQUIRE(seq.size() == oracle.size());
        for (std::size_t k = 0; k < oracle.size(); ++k) CHECK(seq.records[k].tau == oracle[k]);
        found += static_cast<int>(oracle.size());
      }
    }
  }
  CHECK(found > 100);
}

TEST_CASE("ballistic walk produces L-regenerations") {
  const auto env = drifted_srw(2, 0.2);
  Rng rng(7);
  const auto p = simulate_with_coins(*env, 0.1, origin(), 1000000, rng, 8);
  LRegenConfig cfg;
  cfg.L = 2;
  cfg.c5 = 50;
  const auto seq = detect_L_regenerations(p, cfg);
  CHECK(seq.size() >= 1);
  for (std::size_t k = 1; k < seq.size(); ++k) CHECK(seq.records[k].tau > seq.records[k - 1].tau);
}

TEST_CASE("splitting representation") {
  SUBCASE("nu equal to mu") {
    const std::vector<double> mu{0.2, 0.3, 0.5};
    const auto s = split_representation(mu, mu, 0.5);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(s.z_law()[i] == doctest::Approx(mu[i]).epsilon(1e-15));
      CHECK(s.mixture()[i] == doctest::Approx(mu[i]).epsilon(1e-15));
    }
  }
  SUBCASE("arithmetic example") {
    const auto s = split_representation({0.5, 0.5}, {0.25, 0.75}, 0.5);
    CHECK(s.z_law()[0] == 0.75);
    CHECK(s.z_law()[1] == 0.25);
    CHECK(s.mixture()[0] == 0.5);
    CHECK(s.mixture()[1] == 0.5);
  }
  SUBCASE("sampler") {
    const std::vector<double> nu{0.1, 0.4, 0.3, 0.2}, mu{0.25, 0.25, 0.25, 0.25};
    const auto s = split_representation(nu, mu, 0.3);
    Rng rng(3);
    std::vector<double> counts(4, 0.0);
    const int n = 1000000;
    for (int i = 0; i < n; ++i) counts[s.sample(rng)] += 1.0;
    double tv = 0.0;
    for (std::size_t i = 0; i < 4; ++i) tv += std::abs(counts[i] / n - nu[i]) / 2.0;
    CHECK(tv < 0.005);
  }
  SUBCASE("ratio condition") {
    CHECK_THROWS_AS(split_representation({0.1, 0.9}, {0.5, 0.5}, 0.5), Error);
  }
}

TEST_CASE("slab laws of the symmetric walk are symmetric") {
  const auto env = drifted_srw(2, 0.0);
  SlabOptions opts;
  opts.W = 40;
  opts.depth = 40;
  opts.deficit_tol = 1.0;
  const auto laws = slab_hitting_distributions(*env, origin(), 2, opts);
  double mean = 0.0;
  for (std::size_t i = 0; i < laws.targets.size(); ++i) {
    mean += laws.forward[i] * static_cast<double>(laws.targets[i][1]);
    const std::size_t mirror = laws.targets.size() - 1 - i;
    CHECK(laws.forward[i] == doctest::Approx(laws.forward[mirror]).epsilon(1e-10));
    CHECK(laws.mu1[i] == doctest::Approx(laws.mu1[mirror]).epsilon(1e-10));
  }
  CHECK(std::abs(mean) < 1e-12);
}

TEST_CASE("slab laws in one dimension are point masses") {
  const auto env = drifted_srw(1, 0.1);
  const auto laws = slab_hitting_distributions(*env, origin(), 10);
  REQUIRE(laws.targets.size() == 1);
  CHECK(laws.mu1[0] == doctest::Approx(1.0));
  CHECK(laws.forward[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("slab solve matches the dense fundamental matrix") {
  EnvironmentModel m = EnvironmentModel::dirichlet(2, 0.1, 11);
  PerturbationParams pp;
  pp.lambda = 0.3;
  const PerturbedEnvironment env(std::make_shared<ModelEnvironment>(m), pp);
  SlabOptions opts;
  opts.W = 3;
  opts.depth = 3;
  opts.deficit_tol = 1.0;
  const Site x{{2, -1, 0, 0}};
  const auto laws = slab_hitting_distributions(env, x, 2, opts);

  // Forward slab: rows x1 - 2 .. x1 + 1, columns x2 - 3 .. x2 + 3.
  auto dense = [&](std::int64_t z_lo, std::int64_t z_hi, const Site& start) {
    std::vector<Site> sites;
    for (std::int64_t a = z_lo; a <= z_hi; ++a)
      for (std::int64_t b = -3; b <= 3; ++b) sites.push_back(Site{{x[0] + a, x[1] + b, 0, 0}});
    const auto n = static_cast<Eigen::Index>(sites.size());
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n), R = Eigen::MatrixXd::Zero(n, 7);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = env.kernel(sites[static_cast<std::size_t>(i)]);
      for (int mv = 1; mv <= 4; ++mv) {
        const Site y = sites[static_cast<std::size_t>(i)] + move_vector(static_cast<MoveCode>(mv));
        const auto it = std::find(sites.begin(), sites.end(), y);
        if (it != sites.end())
          Q(i, it - sites.begin()) += k.prob(static_cast<MoveCode>(mv));
        else if (y[0] == x[0] + 2 && std::llabs(y[1] - x[1]) <= 3)
          R(i, y[1] - x[1] + 3) += k.prob(static_cast<MoveCode>(mv));
      }
    }
    const Eigen::MatrixXd B = (Eigen::MatrixXd::Identity(n, n) - Q).inverse() * R;
    const auto s = std::find(sites.begin(), sites.end(), start) - sites.begin();
    return Eigen::VectorXd(B.row(s).transpose());
  };
  const Eigen::VectorXd fwd = dense(-2, 1, x);
  Site mid = x;
  mid[0] += 1;
  Eigen::VectorXd half = dense(1, 1, mid);
  half /= half.sum();
  for (int i = 0; i < 7; ++i) {
    CHECK(std::abs(laws.forward[static_cast<std::size_t>(i)] - fwd(i)) < 1e-10);
    CHECK(std::abs(laws.mu1[static_cast<std::size_t>(i)] - half(i)) < 1e-10);
  }
}

TEST_CASE("lateral deficit shrinks as the slab widens") {
  EnvironmentModel m = EnvironmentModel::dirichlet(2, 0.1, 5);
  PerturbationParams pp;
  pp.lambda = 0.1;
  const PerturbedEnvironment env(std::make_shared<ModelEnvironment>(m), pp);
  SlabOptions narrow;
  narrow.W = 4;
  narrow.deficit_tol = 1.0;
  SlabOptions wide = narrow;
  wide.W = 8;
  const auto a = slab_hitting_distributions(env, origin(), 10, narrow);
  const auto b = slab_hitting_distributions(env, origin(), 10, wide);
  CHECK(b.mu1_deficit < a.mu1_deficit);
  CHECK(b.forward_deficit < a.forward_deficit);
  SlabOptions strict = narrow;
  strict.deficit_tol = 1e-6;
  CHECK_THROWS_AS(slab_hitting_distributions(env, origin(), 10, strict), Error);
}

TEST_CASE("c1 estimates") {
  const auto env = drifted_srw(2, 0.1);
  const auto est = estimate_c1(*env, 10, SlabOptions{}, {origin(), Site{{5, 3, 0, 0}}});
  CHECK(est.c1 > 0.0);
  CHECK(est.c1 <= 1.0);
  CHECK(est.per_site[0] == doctest::Approx(est.per_site[1]).epsilon(1e-9));

  EnvironmentModel m = EnvironmentModel::dirichlet(2, 0.1, 21);
  PerturbationParams pp;
  pp.lambda = 0.1;
  const PerturbedEnvironment iid(std::make_shared<ModelEnvironment>(m), pp);
  std::vector<Site> sites;
  for (int i = 0; i < 20; ++i) sites.push_back(Site{{7 * i, 3 * i - 20, 0, 0}});
  CHECK(estimate_c1(iid, 10, SlabOptions{}, sites).c1 > 0.0);
}

TEST_CASE("beta-regeneration bookkeeping on a hand-built path") {
  // Spacing 2: coin 1 at level 0 gives S_1 = T_1; the walk then climbs to 7
  // and falls back to 0, so N = 6 and M_1 = 8. Level 4 (lattice 10) is the
  // first admissible coin-1 level and is never backtracked.
  std::vector<MoveCode> moves;
  auto go = [&](int from, int to) {
    for (int v = from; v != to; v += (to > from ? 1 : -1)) moves.push_back(move_code(0, to > from ? 1 : -1));
  };
  go(0, 7);
  go(7, 0);
  go(0, 14);
  PathRecord p(1, origin());
  for (auto m : moves) p.push(m);
  const std::vector<std::uint8_t> coins{1, 1, 1, 0, 1};
  const auto seq = beta_regenerations_from_coins(p, 2, coins);
  REQUIRE(seq.size() == 1);
  const auto& r = seq.records[0];
  CHECK(r.x[0] == 10);
  CHECK(*r.tau_tilde == 14 + 8);
  CHECK(r.tau == 14 + 10);
  CHECK(r.delta == 2);
  CHECK(seq.censored);
}

TEST_CASE("beta-regenerations on a drifted walk") {
  const auto env = drifted_srw(2, 0.1);
  BetaRegenConfig cfg;
  cfg.perturbation.lambda = 0.1;
  cfg.beta = 0.05;
  cfg.horizon = 200000;
  cfg.translation_invariant = true;
  Rng rng(1);
  const auto run = detect_beta_regenerations(*env, cfg, rng);
  REQUIRE(run.sequence.size() > 0);
  const auto lev = run.path.levels();
  std::size_t prev = 0;
  for (const auto& r : run.sequence.records) {
    CHECK(r.tau > prev);
    prev = r.tau;
    CHECK(r.x[0] - run.path.position(*r.tau_tilde)[0] == 10);
    CHECK(r.tau == *r.tau_tilde + r.delta);
    for (std::size_t t = r.tau; t < lev.size(); ++t) REQUIRE(lev[t] > r.x[0] - 10);
  }
}

TEST_CASE("coin frequency equals beta when the laws coincide") {
  const auto env = drifted_srw(1, 0.1);
  BetaRegenConfig cfg;
  cfg.perturbation.lambda = 0.1;
  cfg.beta = 0.3;
  cfg.horizon = 400000;
  cfg.translation_invariant = true;
  Rng rng(2);
  const auto run = detect_beta_regenerations(*env, cfg, rng);
  std::uint64_t ones = 0;
  for (const auto& c : run.coins) ones += c.coin ? 1 : 0;
  const auto est = proportion(ones, run.coins.size());
  CHECK(run.coins.size() > 1000);
  CHECK(est.covers(0.3));
}

TEST_CASE("beta above c1 is rejected") {
  const auto env = drifted_srw(2, 0.1);
  BetaRegenConfig cfg;
  cfg.perturbation.lambda = 0.1;
  cfg.beta = 0.99;
  cfg.horizon = 200000;
  cfg.translation_invariant = true;
  Rng rng(4);
  try {
    detect_beta_regenerations(*env, cfg, rng);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::beta_too_large);
  }
}

TEST_CASE("diagnostics need enough regenerations") {
  std::vector<RegenerationSequence> runs(3);
  DiagnosticsConfig cfg;
  cfg.beta = 0.1;
  cfg.lambda1 = 0.1;
  cfg.kappa = 0.25;
  cfg.c1 = 0.5;
  try {
    regen_diagnostics(runs, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::sample_size);
  }
}
