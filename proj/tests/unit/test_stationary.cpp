#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "doctest.h"
#include "rwre/error.hpp"
#include "rwre/stationary.hpp"

using namespace rwre;

namespace {

// Invariant density from a dense left null vector of K - I.
std::vector<double> dense_oracle(const TorusEnvironment& env) {
  const auto n = static_cast<Eigen::Index>(env.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + 1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Site x = env.box().site(static_cast<std::size_t>(i));
    const auto k = env.at_index(static_cast<std::size_t>(i));
    A(i, i) -= 1.0;
    for (MoveCode m = 0; m <= num_moves(env.dim()); ++m) {
      const auto j = static_cast<Eigen::Index>(env.box().index(env.box().wrap(x + move_vector(m))));
      A(j, i) += k.prob(m);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) A(n, i) = 1.0;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
  b(n) = static_cast<double>(n);
  const Eigen::VectorXd phi = A.colPivHouseholderQr().solve(b);
  return {phi.data(), phi.data() + n};
}

}  // namespace

TEST_CASE("simple random walk has constant density") {
  for (std::int64_t N : {2, 4, 8}) {
    const auto env = periodize(EnvironmentModel::simple(2), N);
    const auto phi = solve_phi(env);
    for (double v : phi.phi) CHECK(std::abs(v - 1.0) < 1e-12);
  }
}

TEST_CASE("two-periodic lazy fixture") {
  const Box box(1, 0, 2);
  TransitionKernel a = TransitionKernel::simple(1);
  TransitionKernel b = TransitionKernel::balanced(1, Vec{0.25});
  const TorusEnvironment env(box, {a, b});
  const auto phi = solve_phi(env);
  CHECK(std::abs(phi.phi[0] - 2.0 / 3.0) < 1e-10);
  CHECK(std::abs(phi.phi[1] - 4.0 / 3.0) < 1e-10);
}

TEST_CASE("random environments agree with the dense oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto env = periodize(EnvironmentModel::dirichlet(2, 0.1, seed), 6);
    const auto phi = solve_phi(env);
    CHECK(phi.residual < 1e-10);
    CHECK(stationarity_residual(env, phi.phi) < 1e-10);
    CHECK(std::abs(phi.mean() - 1.0) < 1e-12);
    const auto ref = dense_oracle(env);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(phi.phi[i] - ref[i]) < 1e-8);
  }
}

TEST_CASE("direct fallback") {
  const auto env = periodize(EnvironmentModel::trap(2, 0.05, 0.2, 0.005, 0.2, 3), 5);
  PhiSolverOptions opts;
  opts.max_iterations = 5;
  const auto phi = solve_phi(env, opts);
  CHECK(phi.method == "direct");
  CHECK(phi.residual < 1e-10);
  const auto ref = dense_oracle(env);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(phi.phi[i] - ref[i]) < 1e-8);
}

TEST_CASE("Q expectations on SRW") {
  const auto env = periodize(EnvironmentModel::simple(2), 3);
  const auto phi = solve_phi(env);
  CHECK(q_expectation(phi, env, [](const TransitionKernel&) { return 3.0; }) == doctest::Approx(3.0));
  CHECK(q_expectation(phi, env, [](const TransitionKernel& k) { return k.p_plus[0]; }) == doctest::Approx(0.25));
  const auto d = diffusivity_diagonal(phi, env);
  CHECK(d[0] == doctest::Approx(0.5));
  std::vector<double> eps(env.size(), 0.25);
  CHECK(weighted_norm(phi, eps, 2.0) == doctest::Approx(0.25));
}

TEST_CASE("diffusivity is deterministic across workers") {
  const auto m = EnvironmentModel::dirichlet(2, 0.1, 0);
  const auto a = diffusivity(m, 4, 6, 11, 1);
  const auto b = diffusivity(m, 4, 6, 11, 3);
  CHECK(a.per_seed == b.per_seed);
  CHECK(a.seeds == b.seeds);
  for (int i = 0; i < 2; ++i) CHECK(a.diagonal[static_cast<std::size_t>(i)].mean > 2 * 0.1);
}

TEST_CASE("phi dump round trip") {
  const auto env = periodize(EnvironmentModel::dirichlet(2, 0.1, 4), 3);
  const auto phi = solve_phi(env);
  std::stringstream ss;
  write_phi(ss, phi, 4);
  const auto back = read_phi(ss);
  CHECK(back.seed == 4);
  CHECK(back.phi.phi == phi.phi);
  CHECK(back.phi.residual == phi.residual);
  std::stringstream bad("nope");
  CHECK_THROWS_AS(read_phi(bad), Error);
}
