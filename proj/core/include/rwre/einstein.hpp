#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/stats.hpp"
#include "rwre/walk.hpp"

namespace rwre {

/// Annealed estimates draw a fresh environment per walker; quenched ones keep
/// the model's own seed for every walker.
enum class Averaging { annealed, quenched };

std::string to_string(Averaging a);

struct WalkerSetup {
  EnvironmentModel model;
  PerturbationParams perturbation;
  std::uint64_t walkers = 10000;
  std::uint64_t seed = 0;
  int workers = 1;
  Averaging averaging = Averaging::annealed;
};

struct VelocityEstimate {
  std::size_t horizon = 0;
  std::vector<Estimate> v;  // per axis
  std::uint64_t walkers = 0;
  std::uint64_t seed = 0;
  Averaging averaging = Averaging::annealed;
};

/// Per-axis mean of X_horizon / horizon under the drifted law.
VelocityEstimate velocity(const WalkerSetup& setup, std::size_t horizon);

struct ERPoint {
  double lambda = 0.0;
  double t = 0.0;
  std::size_t steps = 0;     // ceil(t / lambda^2)
  double t_effective = 0.0;  // steps * lambda^2
  Vec ell{};
  std::vector<Estimate> estimate;  // lambda E[X_steps . e_i] / t_effective
  std::uint64_t walkers = 0;
  std::uint64_t seed = 0;
  Averaging averaging = Averaging::annealed;
};

/// Number of steps used for time t at strength lambda.
std::size_t rescaled_steps(double t, double lambda);

ERPoint rescaled_mean(const WalkerSetup& setup, double t);

struct GirsanovWeight {
  double G = 0.0;
  double weight = 1.0;
};

/// G = sum_{j <= ceil(t)} log(1 + lambda l.(X_j - X_{j-1})).
GirsanovWeight girsanov_weight(const PathRecord& path, const PerturbationParams& p, double t);

/// lambda_1 = (ceil((2 lambda l_1)^{-1}))^{-1} / 2.
double lambda1(double lambda_ell1);
/// 1 / lambda_1 as an integer lattice distance.
std::int64_t level_spacing(double lambda_ell1);

/// P(T_n < T_{-m}) = (1 - q^m) / (1 - q^{m+n}), q = ((1 - lambda l_1)/(1 + lambda l_1))^{1/lambda_1}.
double hitting_formula(double lambda_ell1, double n, double m);

/// Monte Carlo estimate of P(T_n < T_{-m}) for the drifted walk, levels in
/// units of 1/lambda_1.
Estimate hitting_monte_carlo(const WalkerSetup& setup, double n, double m);

struct HittingTailRow {
  double t = 0.0;
  std::size_t threshold = 0;  // ceil(t / lambda_1^2)
  Estimate tail;              // P(T_m >= t / lambda_1^2)
  double bound = 0.0;         // 2 exp(-t kappa^2 / (2m))
  bool ok = true;
};

struct HittingTailReport {
  double m = 0.0;
  double kappa = 0.0;
  std::vector<HittingTailRow> rows;
  bool ok = true;
};

HittingTailReport hitting_tail_check(const WalkerSetup& setup, double m, const std::vector<double>& t_list);

}  // namespace rwre
