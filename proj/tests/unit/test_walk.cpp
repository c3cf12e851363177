#include <cmath>
#include <map>
#include <memory>
#include <sstream>

#include "doctest.h"
#include "rwre/error.hpp"
#include "rwre/stats.hpp"
#include "rwre/walk.hpp"

using namespace rwre;

namespace {

PathRecord from_moves(int dim, std::initializer_list<MoveCode> moves) {
  PathRecord p(dim, origin());
  for (auto m : moves) p.push(m);
  return p;
}

// Definition of R on explicit positions.
std::optional<std::size_t> naive_R(const PathRecord& path, double c5) {
  const auto lv = path.levels();
  std::map<std::int64_t, std::size_t> count;
  for (std::size_t n = 0; n < lv.size(); ++n) {
    if (n >= 1 && lv[n] <= 0) return n;
    if (lv[n] >= 0) {
      const auto c = ++count[lv[n]];
      if (static_cast<double>(c) > c5 * static_cast<double>((lv[n] + 1) * (lv[n] + 1))) return n;
    }
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("sample_move inverts the kernel") {
  const auto k = TransitionKernel::balanced(2, Vec{0.1, 0.3});
  CHECK(sample_move(k, 0.0) == move_code(0, 1));
  std::map<MoveCode, int> hist;
  for (int i = 0; i < 1000; ++i) ++hist[sample_move(k, (i + 0.5) / 1000.0)];
  CHECK(hist[move_code(0, 1)] == 100);
  CHECK(hist[move_code(0, -1)] == 100);
  CHECK(hist[move_code(1, 1)] == 300);
  CHECK(hist[move_code(1, -1)] == 300);
}

TEST_CASE("positions from checkpoints match a full replay") {
  const ModelEnvironment env(EnvironmentModel::dirichlet(3, 0.05, 4));
  Rng rng(5);
  const auto path = simulate(env, Site{{7, -3, 2}}, 20000, rng);
  const auto all = path.positions();
  REQUIRE(all.size() == 20001);
  for (std::size_t n : {0ul, 1ul, 4095ul, 4096ul, 4097ul, 12345ul, 20000ul}) CHECK(path.position(n) == all[n]);
  CHECK(path.end() == all.back());
  const auto lv = path.levels(2);
  CHECK(lv[12345] == all[12345][2] - 2);
}

TEST_CASE("two-step law of the coin construction equals the direct law") {
  const double kappa = 0.1;
  const ModelEnvironment env(EnvironmentModel::dirichlet(2, kappa, 21));
  const double pc = 2.0 * kappa;
  double tv = 0.0;
  for (MoveCode m1 = 1; m1 <= 4; ++m1) {
    for (MoveCode m2 = 1; m2 <= 4; ++m2) {
      const Site y = move_vector(m1);
      const auto kx = env.kernel(origin()), ky = env.kernel(y);
      const double direct = kx.prob(m1) * ky.prob(m2);
      double coin = 0.0;
      for (int c1 = 0; c1 < 2; ++c1)
        for (int c2 = 0; c2 < 2; ++c2)
          coin += (c1 ? pc : 1 - pc) * (c2 ? pc : 1 - pc) * coin_step_law(kx, kappa, c1)[m1] *
                  coin_step_law(ky, kappa, c2)[m2];
      tv += 0.5 * std::abs(direct - coin);
    }
  }
  CHECK(tv <= 1e-12);
  CHECK(coin_step_law(TransitionKernel::simple(2), 0.1, true)[1] == doctest::Approx(0.25));
}

TEST_CASE("coin walk endpoints agree with direct walks") {
  const auto model = EnvironmentModel::dirichlet(2, 0.1, 8);
  const ModelEnvironment env(model);
  const Box bins = Box::centred(2, 10);
  std::vector<double> a(bins.size()), b(bins.size());
  for (int i = 0; i < 40000; ++i) {
    Rng r1(task_seed(1, "direct", static_cast<std::uint64_t>(i)));
    Rng r2(task_seed(1, "coin", static_cast<std::uint64_t>(i)));
    a[bins.index(simulate(env, origin(), 10, r1).end())] += 1;
    const auto p = simulate_with_coins(env, 0.1, origin(), 10, r2, task_seed(2, "coins", static_cast<std::uint64_t>(i)));
    b[bins.index(p.end())] += 1;
    REQUIRE(p.coins);
    CHECK(p.coins->bits.size() == 10);
  }
  CHECK(two_sample_chi2_pvalue(a, b) > 0.01);
  Rng rng(3);
  CHECK_THROWS_AS(simulate_with_coins(env, 0.2, origin(), 10, rng, 1), Error);
}

TEST_CASE("martingale and quadratic variation") {
  const ModelEnvironment env(EnvironmentModel::dirichlet(2, 0.1, 12));
  std::vector<double> inc, qv;
  for (int i = 0; i < 5000; ++i) {
    Rng rng(task_seed(4, "mart", static_cast<std::uint64_t>(i)));
    const auto p = simulate(env, origin(), 200, rng);
    inc.push_back(static_cast<double>(p.position(101)[0] - p.position(100)[0]));
    qv.push_back(static_cast<double>(norm2_sq(p.end())) - 200.0);
  }
  CHECK(sample_mean(inc).covers(0.0));
  CHECK(sample_mean(qv).covers(0.0));
}

TEST_CASE("R examples") {
  CHECK_FALSE(stopping_R(from_moves(2, {1, 1, 1, 1, 1}), 1.0));
  CHECK(stopping_R(from_moves(2, {1, 2}), 50.0) == std::optional<std::size_t>{2});
  CHECK(stopping_R(from_moves(2, {1, 3, 4, 3, 4, 3}), 1.0) == std::optional<std::size_t>{5});
}

TEST_CASE("R and level statistics against definitions") {
  const auto base = std::make_shared<ModelEnvironment>(EnvironmentModel::dirichlet(2, 0.1, 3));
  PerturbationParams pp;
  pp.lambda = 0.4;
  const PerturbedEnvironment env(base, pp);
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng(s);
    const auto p = simulate(env, origin(), 300, rng);
    for (double c5 : {0.5, 1.0, 2.0, 10.0}) CHECK(stopping_R(p, c5) == naive_R(p, c5));
    const LevelStats ls(p);
    const auto lv = p.levels();
    for (std::int64_t i = 0; i <= ls.max_level(); ++i) {
      std::size_t t = 0;
      while (lv[t] != i) ++t;
      CHECK(ls.T(i) == t);
      for (std::int64_t j = i + 1; j <= ls.max_level(); ++j) {
        std::size_t n = 0, last = 0;
        for (std::size_t k = 0; k < ls.T(j); ++k)
          if (lv[k] == i) {
            ++n;
            last = k;
          }
        CHECK(ls.N(i, j) == n);
        CHECK(ls.N(i, j) >= 1);
        if (j + 1 <= ls.max_level()) CHECK(ls.N(i, j + 1) >= ls.N(i, j));
        CHECK(ls.h(i, j - i) == last - ls.T(i));
      }
    }
  }
}

TEST_CASE("E_{M,l} is positive for ballistic runs") {
  const auto base = std::make_shared<ModelEnvironment>(EnvironmentModel::dirichlet(2, 0.1, 6));
  PerturbationParams pp;
  pp.lambda = 0.3;
  const PerturbedEnvironment env(base, pp);
  Rng rng(9);
  const auto p = simulate(env, origin(), 40000, rng);
  const LevelStats ls(p);
  REQUIRE(ls.max_level() >= 1020);
  for (std::int64_t l : {1, 5, 10, 20}) CHECK(ls.E(1000, l, 100.0) > 0.05);
  CHECK_THROWS_AS(ls.E(ls.max_level(), 1, 1.0), Error);
  std::ostringstream csv;
  ls.write_csv(csv, 3);
  CHECK(csv.str().rfind("i,T_i,N_i_il,h_i_l,H_i_l\r\n", 0) == 0);
}

TEST_CASE("exit times") {
  for (int d : {2, 3}) {
    const ModelEnvironment srw(EnvironmentModel::simple(d));
    const ModelEnvironment rnd(EnvironmentModel::dirichlet(d, 0.1, 77));
    for (double r : {4.0, 8.0}) {
      for (const Environment* env : {static_cast<const Environment*>(&srw), static_cast<const Environment*>(&rnd)}) {
        const double exact = expected_exit_time_exact(*env, origin(), r);
        CHECK(exact <= (r + 1) * (r + 1));
        std::vector<double> t;
        for (int i = 0; i < 3000; ++i) {
          Rng rng(task_seed(10, "exit", static_cast<std::uint64_t>(i)));
          const auto e = exit_time_ball(*env, origin(), r, 1000000, rng);
          CHECK(norm2_sq(e.exit) > r * r);
          t.push_back(static_cast<double>(e.tau));
        }
        CHECK(sample_mean(t).covers(exact));
      }
    }
  }
  const ModelEnvironment srw1(EnvironmentModel::simple(1));
  CHECK(expected_exit_time_exact(srw1, origin(), 3.0) == doctest::Approx(16.0));
  Rng rng(1);
  CHECK_THROWS_AS(exit_time_ball(srw1, origin(), 100.0, 10, rng), Error);
  Rng rng2(1);
  CHECK(exit_time_ball(srw1, origin(), 100.0, 10, rng2, false).censored);
}

TEST_CASE("recorded exit time and level hitting") {
  const auto p = from_moves(2, {1, 3, 1, 1, 2, 1, 1});
  CHECK(exit_time_ball(p, 2.0).tau == 3);
  CHECK(first_hitting_level(p, 3) == std::optional<std::size_t>{4});
  CHECK_FALSE(first_hitting_level(p, -1));
  const auto T = level_hitting_times(p, 2, 3);
  CHECK(T[0] == std::optional<std::size_t>{0});
  CHECK(T[1] == std::optional<std::size_t>{3});
  CHECK(T[2] == std::optional<std::size_t>{7});
  CHECK_FALSE(T[3]);
}

TEST_CASE("path dump round trip") {
  const ModelEnvironment env(EnvironmentModel::dirichlet(3, 0.1, 2));
  Rng rng(4);
  const auto p = simulate(env, Site{{1, 2, 3}}, 10001, rng);
  std::stringstream ss;
  write_path(ss, p, 42, "iid-dirichlet-balanced seed=2");
  const auto back = read_path(ss);
  CHECK(back.seed == 42);
  CHECK(back.env_descriptor == "iid-dirichlet-balanced seed=2");
  CHECK(back.path.moves() == p.moves());
  CHECK(back.path.start() == p.start());
  CHECK(back.path.end() == p.end());
  std::stringstream bad("garbage");
  CHECK_THROWS_AS(read_path(bad), Error);
}

TEST_CASE("visits to the start") {
  const ModelEnvironment env(EnvironmentModel::simple(1));
  Rng rng(2);
  const auto v = visits_to_start(env, origin(), {10, 100, 1000}, rng);
  CHECK(v[0] <= v[1]);
  CHECK(v[1] <= v[2]);
  CHECK(v[0] <= 5);
  Rng rng2(2);
  CHECK_THROWS_AS(visits_to_start(env, origin(), {10, 5}, rng2), Error);
}
