#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/stats.hpp"

namespace rwre {

/// Density of the invariant measure of the walk on a torus relative to the
/// uniform measure; the values have mean 1.
struct StationaryDensity {
  Box box;
  std::vector<double> phi;
  double residual = 0.0;  // sup_x |(Phi K)(x) - Phi(x)|
  std::size_t iterations = 0;
  std::string method;  // "power" or "direct"

  double at(const Site& s) const { return phi[box.index(box.wrap(s))]; }
  double mean() const;
};

struct PhiSolverOptions {
  double tol = 1e-10;
  std::size_t max_iterations = 20000;
  std::size_t aitken_every = 50;
  /// Largest torus for which the direct fallback is attempted.
  std::size_t direct_limit = 100000;
};

/// One application of the transposed kernel: (Phi K)(x) = sum_y Phi(y) K(y -> x).
std::vector<double> apply_transpose(const TorusEnvironment& env, std::span<const double> phi);

double stationarity_residual(const TorusEnvironment& env, std::span<const double> phi);

/// Lazy power iteration with Aitken extrapolation; direct sparse solve when the
/// iteration misses the tolerance.
StationaryDensity solve_phi(const TorusEnvironment& env, const PhiSolverOptions& opts = {});

/// (|Delta|^{-1} sum_x |Phi(x) f(x)|^j)^{1/j} with f given per torus index.
double weighted_norm(const StationaryDensity& phi, std::span<const double> f, double j);

/// Phi-weighted average of g(w_x) over the torus, i.e. the Q_N expectation.
double q_expectation(const StationaryDensity& phi, const TorusEnvironment& env,
                     const std::function<double(const TransitionKernel&)>& g);

/// Per-seed 2 E_{Q_N} w(o, e_i).
std::vector<double> diffusivity_diagonal(const StationaryDensity& phi, const TorusEnvironment& env);

struct DiffusivityMatrix {
  int dim = 0;
  std::vector<Estimate> diagonal;
  std::vector<std::vector<double>> per_seed;  // per_seed[s][i]
  std::vector<std::uint64_t> seeds;
  std::vector<double> residuals;
};

/// D = diag(2 E_Q w(o, e_i)) with E_Q replaced by Q_N averages over seeds.
DiffusivityMatrix diffusivity(const EnvironmentModel& model, std::int64_t N, std::size_t n_seeds,
                              std::uint64_t master_seed, int workers = 1, const PhiSolverOptions& opts = {});

/// Seed used for environment number `index` of an experiment stream.
std::uint64_t environment_seed(std::uint64_t master, std::string_view stream, std::uint64_t index);

/// Binary Phi dump: magic, half-width, dim, seed, residual, values.
void write_phi(std::ostream& out, const StationaryDensity& phi, std::uint64_t seed);
struct PhiDump {
  StationaryDensity phi;
  std::uint64_t seed = 0;
};
PhiDump read_phi(std::istream& in);

}  // namespace rwre
