#include <cmath>
#include <deque>
#include <map>

#include "doctest.h"
#include "rwre/error.hpp"
#include "rwre/percolation.hpp"

using namespace rwre;

namespace {

// Flood-fill labels of the open sites in the window.
std::vector<std::int32_t> flood_fill(const ClusterMap& cm) {
  const Box& w = cm.window();
  std::vector<std::int32_t> label(w.size(), -1);
  std::int32_t next = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!cm.open(w.site(i)) || label[i] >= 0) continue;
    std::deque<Site> q{w.site(i)};
    label[i] = next;
    while (!q.empty()) {
      const Site s = q.front();
      q.pop_front();
      for (MoveCode m = 1; m <= num_moves(w.dim()); ++m) {
        const Site t = s + move_vector(m);
        if (cm.open(t) && label[w.index(t)] < 0) {
          label[w.index(t)] = next;
          q.push_back(t);
        }
      }
    }
    ++next;
  }
  return label;
}

EnvironmentModel trap_model(double p, std::uint64_t seed) { return EnvironmentModel::trap(2, 0.05, p, 0.01, 0.2, seed); }

}  // namespace

TEST_CASE("union-find labels equal flood-fill labels") {
  for (double p : {0.1, 0.4, 0.6}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const ModelEnvironment env(trap_model(p, seed));
      const auto cm = classify_and_cluster(env, Box::centred(2, 15), 0.02);
      const auto ff = flood_fill(cm);
      std::map<std::int32_t, std::int32_t> fwd, back;
      const Box& w = cm.window();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const auto a = cm.label(w.site(i));
        CHECK((a < 0) == (ff[i] < 0));
        if (a < 0) continue;
        CHECK(fwd.emplace(a, ff[i]).first->second == ff[i]);
        CHECK(back.emplace(ff[i], a).first->second == a);
      }
      CHECK(fwd.size() == cm.clusters().size());
    }
  }
}

TEST_CASE("cluster geometry") {
  TransitionKernel strong = TransitionKernel::simple(2);
  PatchEnvironment env(strong);
  TransitionKernel weak = TransitionKernel::balanced(2, Vec{0.01, 0.24});
  env.set(origin(), weak);
  env.set(unit(0), weak);
  const auto cm = classify_and_cluster(env, Box::centred(2, 5), 0.02);
  REQUIRE(cm.clusters().size() == 1);
  const auto& c = cm.clusters()[0];
  CHECK(c.sites.size() == 2);
  CHECK(c.boundary.size() == 6);
  CHECK(c.diameter == 2);
  CHECK_FALSE(c.censored);
  CHECK(cm.l(origin()) == 2);
  CHECK(cm.l(unit(1)) == 0);
  CHECK(cm.open_count() == 2);
}

TEST_CASE("q_n table") {
  CHECK(sphere_size(2, 1) == 8);
  CHECK(sphere_size(2, 4) == 32);
  CHECK(sphere_size(3, 0) == 1);
  const auto t = estimate_qn(trap_model(0.45, 0), 0.02, {1, 2, 3, 4}, 20000, 3);
  for (std::size_t i = 1; i < t.rows.size(); ++i) CHECK(t.rows[i].q.mean <= t.rows[i - 1].q.hi());
  CHECK(t.phi_defined);
  CHECK(t.phi > 0.0);
  const auto t2 = estimate_qn(trap_model(0.45, 0), 0.02, {1, 2, 3, 4}, 20000, 3, 4);
  for (std::size_t i = 0; i < t.rows.size(); ++i) CHECK(t.rows[i].hits == t2.rows[i].hits);
  CHECK_THROWS_AS(t.at(7), Error);
}

TEST_CASE("exit kernels are balanced probability vectors with the corner bound") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 40 && checked < 60; ++seed) {
    const ModelEnvironment env(trap_model(0.3, seed));
    const auto cm = classify_and_cluster(env, Box::centred(2, 12), 0.02);
    for (const auto& c : cm.clusters()) {
      if (c.censored) continue;
      const Site x = c.sites.front();
      const auto lam = build_lambda(env, cm, x, 0.2);
      CHECK(lam.paths.size() == 4);
      CHECK(lam.contains(x));
      const auto a = exit_kernel(env, lam);
      double mass = 0.0;
      Vec mean{};
      for (const auto& j : a) {
        CHECK(j.weight >= -1e-15);
        CHECK_FALSE(lam.contains(j.to));
        mass += j.weight;
        for (int i = 0; i < 2; ++i) mean[i] += j.weight * static_cast<double>(j.to[i] - x[i]);
      }
      CHECK(std::abs(mass - 1.0) < 1e-10);
      CHECK(std::abs(mean[0]) < 1e-10);
      CHECK(std::abs(mean[1]) < 1e-10);
      for (const auto& cc : check_corner_bound(2, a, lam, cm.l(x), 0.02)) CHECK(cc.ok);
      ++checked;
    }
  }
  CHECK(checked >= 30);
}

TEST_CASE("closed site has a trivial Lambda") {
  const ModelEnvironment env(EnvironmentModel::simple(2));
  const auto cm = classify_and_cluster(env, Box::centred(2, 3), 0.02);
  const auto lam = build_lambda(env, cm, origin(), 0.2);
  CHECK(lam.sites.size() == 1);
  const auto a = exit_kernel(env, lam);
  CHECK(a.size() == 4);
  for (const auto& j : a) CHECK(j.weight == doctest::Approx(0.25));
}

TEST_CASE("Phi control has no violations") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto model = trap_model(0.1, seed);
    const auto torus = periodize(model, 8);
    const auto phi = solve_phi(torus);
    const ModelEnvironment env(model);
    const auto cm = classify_and_cluster(env, Box::centred(2, 20), 0.02);
    const auto rep = check_phi_control(phi, cm, 0.2);
    CHECK(rep.violations == 0);
  }
  const auto torus = periodize(EnvironmentModel::simple(2), 3);
  const auto phi = solve_phi(torus);
  const ModelEnvironment srw(EnvironmentModel::simple(2));
  CHECK(check_phi_control(phi, classify_and_cluster(srw, Box::centred(2, 5), 0.02), 0.2).rows.empty());
}

TEST_CASE("eps0 at most kappa gives no open sites") {
  const auto model = EnvironmentModel::dirichlet(2, 0.1, 2);
  const ModelEnvironment env(model);
  const auto cm = classify_and_cluster(env, Box::centred(2, 12), 0.1);
  CHECK(cm.open_count() == 0);
  CHECK(cm.l(origin()) == 0);
  const auto t = estimate_qn(model, 0.1, {1, 2, 4}, 2000, 5);
  for (const auto& r : t.rows) CHECK(r.hits == 0);
  CHECK_FALSE(t.phi_defined);
}

TEST_CASE("singleton cluster") {
  PatchEnvironment env(TransitionKernel::simple(2));
  env.set(origin(), TransitionKernel::balanced(2, Vec{0.24, 0.01}));
  const auto cm = classify_and_cluster(env, Box::centred(2, 4), 0.02);
  REQUIRE(cm.clusters().size() == 1);
  CHECK(cm.clusters()[0].boundary.size() == 4);
  CHECK(cm.l(origin()) == 1);
  const auto lam = build_lambda(env, cm, origin(), 0.2);
  for (const auto& p : lam.paths) {
    CHECK(p.sites.size() == 2);
    CHECK(p.target() == (p.kappa[0] > 0 ? unit(0) : Site{} - unit(0)));
  }
  const auto a = exit_kernel(env, lam);
  double mass = 0.0;
  for (const auto& j : a) mass += j.weight;
  CHECK(std::abs(mass - 1.0) < 1e-12);
}

TEST_CASE("L-shaped cluster matches hand enumeration") {
  PatchEnvironment env(TransitionKernel::simple(2));
  const Site e1 = unit(0), e2 = unit(1);
  env.set(origin(), TransitionKernel::balanced(2, Vec{0.24, 0.01}));
  env.set(e1, TransitionKernel::balanced(2, Vec{0.01, 0.24}));
  env.set(e1 + e2, TransitionKernel::balanced(2, Vec{0.24, 0.01}));
  const auto cm = classify_and_cluster(env, Box::centred(2, 6), 0.02);
  REQUIRE(cm.clusters().size() == 1);
  CHECK(cm.clusters()[0].sites.size() == 3);
  CHECK(cm.l(origin()) == 3);
  const auto lam = build_lambda(env, cm, origin(), 0.2);
  REQUIRE(lam.paths.size() == 4);
  std::map<std::pair<int, int>, std::vector<Site>> expect{
      {{1, 1}, {origin(), e1, e1 + e2, e1 + e1 + e2}},
      {{1, -1}, {origin(), e1, e1 - e2}},
      {{-1, 1}, {origin(), Site{} - e1}},
      {{-1, -1}, {origin(), Site{} - e1}},
  };
  for (const auto& p : lam.paths) CHECK(p.sites == expect.at({p.kappa[0], p.kappa[1]}));
  for (const Site& s : {origin(), e1, e1 + e2, e1 + e1 + e2, e1 - e2, Site{} - e1}) CHECK(lam.contains(s));
  CHECK_FALSE(lam.contains(e2));
  const auto a = exit_kernel(env, lam);
  Vec mean{};
  double mass = 0.0;
  for (const auto& j : a) {
    mass += j.weight;
    for (int i = 0; i < 2; ++i) mean[i] += j.weight * static_cast<double>(j.to[i]);
  }
  CHECK(std::abs(mass - 1.0) < 1e-12);
  CHECK(std::abs(mean[0]) < 1e-10);
  CHECK(std::abs(mean[1]) < 1e-10);
  for (const auto& cc : check_corner_bound(2, a, lam, cm.l(origin()), 0.02)) CHECK(cc.ok);
}
