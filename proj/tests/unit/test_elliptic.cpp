#include <cmath>
#include <memory>

#include "doctest.h"
#include "rwre/elliptic.hpp"
#include "rwre/error.hpp"
#include "rwre/rng.hpp"

using namespace rwre;

namespace {

bool feasible(const Domain& E, const std::vector<double>& u, std::size_t xi, double s0, double s1) {
  const Site x = E.closure()[xi];
  for (std::size_t j = 0; j < E.closure().size(); ++j) {
    const Site z = E.closure()[j] - x;
    if (s0 * static_cast<double>(z[0]) + s1 * static_cast<double>(z[1]) > u[xi] - u[j] + 1e-9) return false;
  }
  return true;
}

// Nonempty iff some vertex of the constraint polygon is feasible (it is
// bounded because the four neighbours of x are in the closure).
bool vertex_oracle(const Domain& E, const std::vector<double>& u, std::size_t xi) {
  const Site x = E.closure()[xi];
  const auto& c = E.closure();
  for (std::size_t a = 0; a < c.size(); ++a) {
    for (std::size_t b = a + 1; b < c.size(); ++b) {
      const double a0 = static_cast<double>(c[a][0] - x[0]), a1 = static_cast<double>(c[a][1] - x[1]);
      const double b0 = static_cast<double>(c[b][0] - x[0]), b1 = static_cast<double>(c[b][1] - x[1]);
      const double det = a0 * b1 - a1 * b0;
      if (std::abs(det) < 1e-12) continue;
      const double ra = u[xi] - u[a], rb = u[xi] - u[b];
      if (feasible(E, u, xi, (ra * b1 - rb * a1) / det, (a0 * rb - b0 * ra) / det)) return true;
    }
  }
  return false;
}

bool grid_oracle(const Domain& E, const std::vector<double>& u, std::size_t xi) {
  for (int i = -80; i <= 80; ++i)
    for (int j = -80; j <= 80; ++j)
      if (feasible(E, u, xi, i / 8.0, j / 8.0)) return true;
  return false;
}

std::shared_ptr<ModelEnvironment> random_env(std::uint64_t seed) {
  return std::make_shared<ModelEnvironment>(EnvironmentModel::dirichlet(2, 0.1, seed));
}

}  // namespace

TEST_CASE("operator annihilates affine functions") {
  const auto env = random_env(1);
  const auto L = DifferenceOperator::from_environment(env);
  const Domain E = Domain::cube(2, origin(), 4);
  SiteValues u;
  for (const auto& z : E.closure()) u[z] = 3.0 - 2.0 * static_cast<double>(z[0]) + 5.0 * static_cast<double>(z[1]);
  for (const auto& x : E.interior()) {
    CHECK(std::abs(apply(L, u, x)) < 1e-13);
    const Vec b = L.balance(x);
    CHECK(std::abs(b[0]) < 1e-15);
    CHECK(L.jump_radius(x) == 1);
  }
  SiteValues partial{{origin(), 1.0}};
  CHECK_THROWS_AS(apply(L, partial, origin()), Error);
}

TEST_CASE("contact set agrees with enumeration oracles on 5x5 fixtures") {
  const Domain E = Domain::cube(2, origin(), 2);
  REQUIRE(E.interior().size() == 25);
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    Rng rng(seed);
    std::vector<double> u(E.closure().size());
    for (double& v : u) v = static_cast<double>(rng.below(7));
    if (seed % 3 == 0)
      for (std::size_t i = 0; i < u.size(); ++i)
        u[i] = -static_cast<double>(norm2_sq(E.closure()[i])) + static_cast<double>(rng.below(2));
    const auto lp = contact_set(E, u, ContactMethod::simplex);
    const auto fm = contact_set(E, u, ContactMethod::fourier_motzkin);
    for (std::size_t x = 0; x < E.interior().size(); ++x) {
      const bool oracle = vertex_oracle(E, u, x);
      CHECK(lp.nonempty[x] == oracle);
      CHECK(fm.nonempty[x] == oracle);
      if (grid_oracle(E, u, x)) CHECK(oracle);
      if (lp.witness[x]) CHECK(feasible(E, u, x, (*lp.witness[x])[0], (*lp.witness[x])[1]));
    }
  }
}

TEST_CASE("contact set of a concave and a convex function") {
  const Domain E = Domain::cube(2, origin(), 3);
  std::vector<double> cap(E.closure().size()), bowl(E.closure().size());
  for (std::size_t i = 0; i < cap.size(); ++i) {
    cap[i] = -static_cast<double>(norm2_sq(E.closure()[i]));
    bowl[i] = -cap[i];
  }
  CHECK(contact_set(E, cap).count() == E.interior().size());
  CHECK(contact_set(E, bowl).count() == 0);
}

TEST_CASE("Dirichlet solves obey the maximum principle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto env = random_env(seed);
    const auto L = DifferenceOperator::from_environment(env);
    const Domain E = Domain::ball(2, origin(), 6.0);
    Rng rng(seed);
    DirichletProblem p{&E, &L, std::vector<double>(E.boundary().size()), std::vector<double>(E.interior().size(), 0.0)};
    for (double& v : p.boundary) v = rng.uniform();
    const auto sol = solve_dirichlet(p);
    CHECK(sol.residual < 1e-9);
    std::vector<double> eps(E.interior().size());
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = epsilon_geo(env->kernel(E.interior()[i]));
    const auto rep = check_maximum_principle(L, E, sol.u, p.rhs, eps);
    CHECK(rep.pure_principle_ok);
    CHECK(rep.bound_ok);

    std::vector<double> g(E.interior().size());
    for (double& v : g) v = rng.uniform();
    DirichletProblem q{&E, &L, p.boundary, std::vector<double>(E.interior().size())};
    for (std::size_t i = 0; i < g.size(); ++i) q.rhs[i] = -g[i];
    const auto s2 = solve_dirichlet(q);
    const auto rep2 = check_maximum_principle(L, E, s2.u, g, eps);
    CHECK(rep2.hypothesis_ok);
    CHECK(rep2.bound_ok);
    CHECK(rep2.max_interior > rep2.max_boundary);
  }
}

TEST_CASE("Harnack ratio") {
  const Domain E = Domain::ball(2, origin(), 8.0);
  std::vector<double> c(E.closure().size(), 2.0);
  CHECK(harnack_ratio(E, c, origin(), 4.0) == 1.0);
  const auto env = random_env(3);
  const auto L = DifferenceOperator::from_environment(env);
  Rng rng(3);
  DirichletProblem p{&E, &L, std::vector<double>(E.boundary().size()), std::vector<double>(E.interior().size(), 0.0)};
  for (double& v : p.boundary) v = rng.uniform_open();
  const auto sol = solve_dirichlet(p);
  const double r = harnack_ratio(E, sol.u, origin(), 4.0);
  CHECK(r > 1.0);
  std::vector<double> zero(E.closure().size(), 0.0);
  CHECK_THROWS_AS(harnack_ratio(E, zero, origin(), 4.0), Error);
  std::vector<double> eps(E.interior().size(), 0.25);
  CHECK(mean_value_ratio(E, c, eps, origin(), 4.0, 2.0) == doctest::Approx(0.25));
}

TEST_CASE("Harnack experiment is deterministic") {
  HarnackConfig cfg;
  cfg.model = EnvironmentModel::dirichlet(2, 0.1, 0);
  cfg.radii = {6, 8};
  cfg.instances = 6;
  cfg.seed = 9;
  const auto a = harnack_experiment(cfg);
  cfg.workers = 3;
  const auto b = harnack_experiment(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].ratio == b[i].ratio);
    CHECK(a[i].ratio >= 1.0);
  }
  CHECK(summarize_harnack(a).size() == 2);
}

TEST_CASE("elliptic fixture round trip") {
  EllipticFixture f = calibrate_on_srw(2, 20, 1);
  CHECK(f.srw_calibrated_ratio > 0.0);
  CHECK(f.srw_calibrated_ratio <= kMaxPrincipleConstant);
  nlohmann::json j = f;
  const auto g = j.get<EllipticFixture>();
  CHECK(g.srw_calibrated_ratio == f.srw_calibrated_ratio);
  CHECK_THROWS_AS(nlohmann::json::object().get<EllipticFixture>(), Error);
}

TEST_CASE("spike boundary data lands on reachable sites") {
  HarnackConfig cfg;
  cfg.model = EnvironmentModel::dirichlet(2, 0.1, 0);
  cfg.radii = {8};
  cfg.instances = 40;
  cfg.spike = true;
  for (const auto& h : harnack_experiment(cfg)) CHECK(h.ratio >= 1.0);
}
