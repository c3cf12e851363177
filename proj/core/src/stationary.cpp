#include "rwre/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "rwre/error.hpp"
#include "rwre/parallel.hpp"
#include "rwre/rng.hpp"
#include "rwre/sparse.hpp"

namespace rwre {

namespace {

constexpr char kPhiMagic[8] = {'R', 'W', 'R', 'E', 'P', 'H', 'I', '1'};

void put_raw(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <class T>
T get_raw(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) fail(ErrorKind::io, "truncated Phi dump");
  return v;
}

void normalize_mean(std::vector<double>& phi) {
  const double m = std::accumulate(phi.begin(), phi.end(), 0.0) / static_cast<double>(phi.size());
  if (!(m > 0.0)) fail(ErrorKind::solver, "stationary vector has nonpositive mass");
  for (double& v : phi) v /= m;
}

std::vector<double> lazy_step(const TorusEnvironment& env, const std::vector<double>& phi) {
  std::vector<double> next = apply_transpose(env, phi);
  for (std::size_t i = 0; i < next.size(); ++i) next[i] = 0.5 * (next[i] + phi[i]);
  return next;
}

std::vector<double> direct_solve(const TorusEnvironment& env) {
  const Box& box = env.box();
  const int d = box.dim();
  const std::size_t n = box.size();
  std::vector<Triplet> t;
  t.reserve(n * static_cast<std::size_t>(2 * d + 2));
  t.emplace_back(0, 0, 1.0);
  for (std::size_t y = 0; y < n; ++y) {
    const TransitionKernel& k = env.at_index(y);
    const Site sy = box.site(y);
    const auto col = static_cast<std::ptrdiff_t>(y);
    if (y != 0) t.emplace_back(col, col, k.p_hold - 1.0);
    for (int m = 1; m <= 2 * d; ++m) {
      const auto x = box.index(box.wrap(sy + move_vector(static_cast<MoveCode>(m))));
      if (x == 0) continue;
      t.emplace_back(static_cast<std::ptrdiff_t>(x), col, k.prob(static_cast<MoveCode>(m)));
    }
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  rhs(0) = 1.0;
  const Eigen::MatrixXd sol = sparse_solve(n, t, rhs);
  std::vector<double> phi(n);
  for (std::size_t i = 0; i < n; ++i) phi[i] = std::max(0.0, sol(static_cast<Eigen::Index>(i), 0));
  normalize_mean(phi);
  return phi;
}

}  // namespace

double StationaryDensity::mean() const {
  return std::accumulate(phi.begin(), phi.end(), 0.0) / static_cast<double>(phi.size());
}

std::vector<double> apply_transpose(const TorusEnvironment& env, std::span<const double> phi) {
  const Box& box = env.box();
  const int d = box.dim();
  std::vector<double> out(phi.size(), 0.0);
  for (std::size_t y = 0; y < phi.size(); ++y) {
    const TransitionKernel& k = env.at_index(y);
    const Site sy = box.site(y);
    out[y] += phi[y] * k.p_hold;
    for (int m = 1; m <= 2 * d; ++m) {
      const auto x = box.index(box.wrap(sy + move_vector(static_cast<MoveCode>(m))));
      out[x] += phi[y] * k.prob(static_cast<MoveCode>(m));
    }
  }
  return out;
}

double stationarity_residual(const TorusEnvironment& env, std::span<const double> phi) {
  const auto next = apply_transpose(env, phi);
  double r = 0.0;
  for (std::size_t i = 0; i < next.size(); ++i) r = std::max(r, std::abs(next[i] - phi[i]));
  return r;
}

StationaryDensity solve_phi(const TorusEnvironment& env, const PhiSolverOptions& opts) {
  for (const auto& k : env.kernels())
    if (k.min_prob() <= 0.0) fail(ErrorKind::precondition, "solve_phi needs an elliptic torus");
  StationaryDensity out;
  out.box = env.box();
  out.method = "power";
  std::vector<double> phi(env.size(), 1.0);
  std::vector<double> prev1, prev2;
  double res = stationarity_residual(env, phi);
  std::size_t it = 0;
  while (res >= opts.tol && it < opts.max_iterations) {
    prev2 = std::move(prev1);
    prev1 = phi;
    phi = lazy_step(env, phi);
    ++it;
    if (opts.aitken_every > 0 && it % opts.aitken_every == 0 && !prev2.empty()) {
      std::vector<double> acc(phi.size());
      bool ok = true;
      for (std::size_t i = 0; i < phi.size() && ok; ++i) {
        const double d1 = phi[i] - prev1[i];
        const double d2 = phi[i] - 2.0 * prev1[i] + prev2[i];
        acc[i] = std::abs(d2) > 1e-300 ? phi[i] - d1 * d1 / d2 : phi[i];
        ok = std::isfinite(acc[i]) && acc[i] > 0.0;
      }
      if (ok) {
        normalize_mean(acc);
        const double r_acc = stationarity_residual(env, acc);
        const double r_cur = stationarity_residual(env, phi);
        if (r_acc < r_cur) phi = std::move(acc);
      }
    }
    if (it % 10 == 0) {
      normalize_mean(phi);
      res = stationarity_residual(env, phi);
    }
  }
  normalize_mean(phi);
  res = stationarity_residual(env, phi);
  if (res >= opts.tol) {
    if (env.size() > opts.direct_limit)
      fail(ErrorKind::solver, "power iteration did not converge; residual " + std::to_string(res));
    phi = direct_solve(env);
    res = stationarity_residual(env, phi);
    out.method = "direct";
    if (res >= opts.tol) fail(ErrorKind::solver, "direct stationary solve residual " + std::to_string(res));
  }
  out.phi = std::move(phi);
  out.residual = res;
  out.iterations = it;
  return out;
}

double weighted_norm(const StationaryDensity& phi, std::span<const double> f, double j) {
  if (!(j >= 1.0)) fail(ErrorKind::domain, "weighted norm exponent must be ≥ 1");
  if (f.size() != phi.phi.size()) fail(ErrorKind::input_mismatch, "function and density sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += std::pow(std::abs(phi.phi[i] * f[i]), j);
  return std::pow(s / static_cast<double>(f.size()), 1.0 / j);
}

double q_expectation(const StationaryDensity& phi, const TorusEnvironment& env,
                     const std::function<double(const TransitionKernel&)>& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < env.size(); ++i) s += phi.phi[i] * g(env.at_index(i));
  return s / static_cast<double>(env.size());
}

std::vector<double> diffusivity_diagonal(const StationaryDensity& phi, const TorusEnvironment& env) {
  const int d = env.dim();
  std::vector<double> out(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i)
    out[static_cast<std::size_t>(i)] = 2.0 * q_expectation(phi, env, [i](const TransitionKernel& k) { return k.p_plus[i]; });
  return out;
}

std::uint64_t environment_seed(std::uint64_t master, std::string_view stream, std::uint64_t index) {
  return task_seed(master, stream, index);
}

DiffusivityMatrix diffusivity(const EnvironmentModel& model, std::int64_t N, std::size_t n_seeds,
                              std::uint64_t master_seed, int workers, const PhiSolverOptions& opts) {
  if (n_seeds == 0) fail(ErrorKind::sample_size, "diffusivity needs at least one seed");
  DiffusivityMatrix out;
  out.dim = model.dim;
  out.seeds.resize(n_seeds);
  out.residuals.resize(n_seeds);
  out.per_seed.resize(n_seeds);
  parallel_for(n_seeds, workers, [&](std::size_t s) {
    const std::uint64_t seed = environment_seed(master_seed, "diffusivity", s);
    const TorusEnvironment env = periodize(model.with_seed(seed), N);
    const StationaryDensity phi = solve_phi(env, opts);
    out.seeds[s] = seed;
    out.residuals[s] = phi.residual;
    out.per_seed[s] = diffusivity_diagonal(phi, env);
  });
  for (int i = 0; i < model.dim; ++i) {
    std::vector<double> col(n_seeds);
    for (std::size_t s = 0; s < n_seeds; ++s) col[s] = out.per_seed[s][static_cast<std::size_t>(i)];
    out.diagonal.push_back(sample_mean(col));
  }
  return out;
}

void write_phi(std::ostream& out, const StationaryDensity& phi, std::uint64_t seed) {
  out.write(kPhiMagic, 8);
  const std::int64_t lo = phi.box.lo(), side = phi.box.side();
  const std::int32_t dim = phi.box.dim();
  const std::int64_t half_width = -lo;
  put_raw(out, &half_width, sizeof half_width);
  put_raw(out, &side, sizeof side);
  put_raw(out, &dim, sizeof dim);
  put_raw(out, &seed, sizeof seed);
  put_raw(out, &phi.residual, sizeof phi.residual);
  const std::uint64_t n = phi.phi.size();
  put_raw(out, &n, sizeof n);
  put_raw(out, phi.phi.data(), n * sizeof(double));
  if (!out) fail(ErrorKind::io, "failed to write Phi dump");
}

PhiDump read_phi(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || !std::equal(magic, magic + 8, kPhiMagic)) fail(ErrorKind::io, "not a Phi dump");
  PhiDump d;
  const auto half_width = get_raw<std::int64_t>(in);
  const auto side = get_raw<std::int64_t>(in);
  const auto dim = get_raw<std::int32_t>(in);
  d.seed = get_raw<std::uint64_t>(in);
  d.phi.residual = get_raw<double>(in);
  const auto n = get_raw<std::uint64_t>(in);
  d.phi.box = Box(dim, -half_width, side);
  if (n != d.phi.box.size()) fail(ErrorKind::io, "Phi dump size does not match its header");
  d.phi.phi.resize(n);
  in.read(reinterpret_cast<char*>(d.phi.phi.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) fail(ErrorKind::io, "truncated Phi dump");
  d.phi.method = "file";
  return d;
}

}  // namespace rwre
