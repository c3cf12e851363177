#include "rwre/einstein.hpp"

#include <algorithm>
#include <cmath>

#include "rwre/error.hpp"
#include "rwre/parallel.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace {

EnvironmentModel walker_model(const WalkerSetup& s, std::uint64_t w) {
  if (s.averaging == Averaging::quenched) return s.model;
  return s.model.with_seed(task_seed(s.seed, "env", w));
}

Rng walker_rng(const WalkerSetup& s, std::uint64_t w) { return Rng(task_seed(s.seed, "walker", w)); }

Site drifted_step(const ModelEnvironment& env, const PerturbationParams& p, const Site& x, Rng& rng) {
  const TransitionKernel k = p.lambda == 0.0 ? env.kernel(x) : perturb(env.kernel(x), p);
  return x + move_vector(sample_move(k, rng.uniform()));
}

Site run_endpoint(const WalkerSetup& s, std::uint64_t w, std::size_t n) {
  const ModelEnvironment env(walker_model(s, w));
  Rng rng = walker_rng(s, w);
  Site x = origin();
  for (std::size_t j = 0; j < n; ++j) x = drifted_step(env, s.perturbation, x, rng);
  return x;
}

void check_setup(const WalkerSetup& s) {
  s.model.validate();
  s.perturbation.validate(s.model.dim);
  if (s.walkers == 0) fail(ErrorKind::sample_size, "at least one walker is required");
}

std::vector<Estimate> per_axis(int dim, const std::vector<Site>& ends, double scale) {
  std::vector<Estimate> out;
  std::vector<double> col(ends.size());
  for (int i = 0; i < dim; ++i) {
    for (std::size_t w = 0; w < ends.size(); ++w) col[w] = static_cast<double>(ends[w][i]) * scale;
    out.push_back(batch_means(col));
  }
  return out;
}

}  // namespace

std::string to_string(Averaging a) { return a == Averaging::annealed ? "annealed" : "quenched"; }

VelocityEstimate velocity(const WalkerSetup& setup, std::size_t horizon) {
  check_setup(setup);
  if (horizon == 0) fail(ErrorKind::domain, "velocity horizon must be positive");
  const auto ends = parallel_map<Site>(setup.walkers, setup.workers,
                                       [&](std::size_t w) { return run_endpoint(setup, w, horizon); });
  VelocityEstimate out;
  out.horizon = horizon;
  out.v = per_axis(setup.model.dim, ends, 1.0 / static_cast<double>(horizon));
  out.walkers = setup.walkers;
  out.seed = setup.seed;
  out.averaging = setup.averaging;
  return out;
}

std::size_t rescaled_steps(double t, double lambda) {
  if (!(t >= 1.0)) fail(ErrorKind::domain, "rescaled time t must be at least 1");
  if (!(lambda > 0.0 && lambda < 1.0)) fail(ErrorKind::domain, "lambda must lie in (0, 1)");
  return static_cast<std::size_t>(std::ceil(t / (lambda * lambda) - 1e-9));
}

ERPoint rescaled_mean(const WalkerSetup& setup, double t) {
  check_setup(setup);
  ERPoint p;
  p.lambda = setup.perturbation.lambda;
  p.t = t;
  p.steps = rescaled_steps(t, p.lambda);
  p.t_effective = static_cast<double>(p.steps) * p.lambda * p.lambda;
  p.ell = setup.perturbation.ell;
  p.walkers = setup.walkers;
  p.seed = setup.seed;
  p.averaging = setup.averaging;
  const auto ends = parallel_map<Site>(setup.walkers, setup.workers,
                                       [&](std::size_t w) { return run_endpoint(setup, w, p.steps); });
  p.estimate = per_axis(setup.model.dim, ends, p.lambda / p.t_effective);
  return p;
}

GirsanovWeight girsanov_weight(const PathRecord& path, const PerturbationParams& p, double t) {
  if (!(t >= 0.0)) fail(ErrorKind::domain, "Girsanov time must be nonnegative");
  const auto n = static_cast<std::size_t>(std::ceil(t));
  if (n > path.length()) fail(ErrorKind::domain, "path shorter than ceil(t)");
  GirsanovWeight out;
  for (std::size_t j = 0; j < n; ++j) {
    const MoveCode m = path.moves()[j];
    if (m == kHold) continue;
    const double x = p.lambda * p.ell[static_cast<std::size_t>(move_axis(m))] * move_sign(m);
    if (!(1.0 + x > 0.0)) fail(ErrorKind::domain, "nonpositive Girsanov factor at step " + std::to_string(j + 1));
    out.G += std::log1p(x);
  }
  out.weight = std::exp(out.G);
  return out;
}

double lambda1(double lambda_ell1) {
  if (!(lambda_ell1 > 0.0 && lambda_ell1 < 1.0)) fail(ErrorKind::domain, "lambda l_1 must lie in (0, 1)");
  return 0.5 / std::ceil(1.0 / (2.0 * lambda_ell1) - 1e-9);
}

std::int64_t level_spacing(double lambda_ell1) {
  return 2 * static_cast<std::int64_t>(std::ceil(1.0 / (2.0 * lambda_ell1) - 1e-9));
}

double hitting_formula(double lambda_ell1, double n, double m) {
  const double l1 = lambda1(lambda_ell1);
  if (!(n > 0.0 && m > 0.0)) fail(ErrorKind::domain, "hitting levels must be positive");
  const double log_q = std::log((1.0 - lambda_ell1) / (1.0 + lambda_ell1)) / l1;
  // 1 - q^k computed as -expm1(k log q) to keep precision when q^k is near 1.
  return std::expm1(m * log_q) / std::expm1((m + n) * log_q);
}

namespace {

std::int64_t level_offset(double levels, std::int64_t spacing) {
  const double d = levels * static_cast<double>(spacing);
  const double r = std::round(d);
  if (std::abs(d - r) > 1e-9) fail(ErrorKind::domain, "level is not a lattice distance");
  return static_cast<std::int64_t>(r);
}

}  // namespace

Estimate hitting_monte_carlo(const WalkerSetup& setup, double n, double m) {
  check_setup(setup);
  const double lam = setup.perturbation.lambda * setup.perturbation.ell[0];
  const std::int64_t spacing = level_spacing(lam);
  const std::int64_t up = level_offset(n, spacing), down = level_offset(m, spacing);
  const auto hits = parallel_map<std::uint8_t>(setup.walkers, setup.workers, [&](std::size_t w) -> std::uint8_t {
    const ModelEnvironment env(walker_model(setup, w));
    Rng rng = walker_rng(setup, w);
    Site x = origin();
    for (;;) {
      x = drifted_step(env, setup.perturbation, x, rng);
      if (x[0] >= up) return 1;
      if (x[0] <= -down) return 0;
    }
  });
  std::uint64_t count = 0;
  for (auto h : hits) count += h;
  return proportion(count, setup.walkers);
}

HittingTailReport hitting_tail_check(const WalkerSetup& setup, double m, const std::vector<double>& t_list) {
  check_setup(setup);
  const double lam = setup.perturbation.lambda * setup.perturbation.ell[0];
  const double l1 = lambda1(lam);
  const std::int64_t target = level_offset(m, level_spacing(lam));
  HittingTailReport rep;
  rep.m = m;
  rep.kappa = setup.model.ellipticity();
  std::size_t cap = 0;
  for (double t : t_list) {
    HittingTailRow row;
    row.t = t;
    row.threshold = static_cast<std::size_t>(std::ceil(t / (l1 * l1) - 1e-9));
    row.bound = 2.0 * std::exp(-t * rep.kappa * rep.kappa / (2.0 * m));
    cap = std::max(cap, row.threshold);
    rep.rows.push_back(row);
  }
  // Hitting times censored at cap are only compared against thresholds <= cap.
  const auto times = parallel_map<std::size_t>(setup.walkers, setup.workers, [&](std::size_t w) {
    const ModelEnvironment env(walker_model(setup, w));
    Rng rng = walker_rng(setup, w);
    Site x = origin();
    std::size_t n = 0;
    while (n < cap && x[0] < target) {
      x = drifted_step(env, setup.perturbation, x, rng);
      ++n;
    }
    return n;
  });
  for (auto& row : rep.rows) {
    std::uint64_t c = 0;
    for (auto tm : times) c += tm >= row.threshold ? 1 : 0;
    row.tail = proportion(c, setup.walkers);
    row.ok = row.tail.mean <= row.bound;
    rep.ok = rep.ok && row.ok;
  }
  return rep;
}

}  // namespace rwre
