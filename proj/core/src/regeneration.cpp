#include "rwre/regeneration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <unordered_map>

#include "rwre/error.hpp"
#include "rwre/parallel.hpp"
#include "rwre/sparse.hpp"

namespace rwre {

namespace {

std::vector<std::int64_t> level_array(const PathRecord& path, std::size_t H) {
  std::vector<std::int64_t> lev(H + 1);
  const auto& moves = path.moves();
  std::int64_t v = path.start()[0];
  lev[0] = v;
  for (std::size_t n = 0; n < H; ++n) {
    const MoveCode m = moves[n];
    if (m != kHold && move_axis(m) == 0) v += move_sign(m);
    lev[n + 1] = v;
  }
  return lev;
}

/// sufmin[n] = min lev[n..H], with sufmin[H+1] = +inf.
std::vector<std::int64_t> suffix_min(const std::vector<std::int64_t>& lev) {
  std::vector<std::int64_t> out(lev.size() + 1, std::numeric_limits<std::int64_t>::max());
  for (std::size_t n = lev.size(); n-- > 0;) out[n] = std::min(out[n + 1], lev[n]);
  return out;
}

/// Smallest k >= 1 with count <= c5 k^2, using the comparison of stopping_R.
std::int64_t min_radius(std::size_t count, double c5) {
  const double c = static_cast<double>(count);
  auto k = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(std::sqrt(c / c5))));
  while (k > 1 && !(c > c5 * static_cast<double>((k - 1) * (k - 1)))) --k;
  while (c > c5 * static_cast<double>(k * k)) ++k;
  return k;
}

}  // namespace

void LRegenConfig::validate() const {
  if (L < 1) fail(ErrorKind::config, "L ≥ 1 required");
  if (!(c5 > 0.0)) fail(ErrorKind::config, "c5 > 0 required");
  if (!(kappa > 0.0)) fail(ErrorKind::config, "κ > 0 required");
}

RegenerationSequence detect_L_regenerations(const PathRecord& path, const LRegenConfig& cfg) {
  cfg.validate();
  const std::size_t H = cfg.horizon == 0 ? path.length() : cfg.horizon;
  if (H > path.length()) fail(ErrorKind::input_mismatch, "horizon exceeds the path length");
  if (!path.coins || path.coins->bits.size() < H)
    fail(ErrorKind::input_mismatch, "coins missing for path steps");
  if (std::abs(path.coins->prob - path.dim() * cfg.kappa) > 1e-12)
    fail(ErrorKind::input_mismatch, "path coins were drawn with a different κ");
  const auto& bits = path.coins->bits;
  const auto& moves = path.moves();

  RegenerationSequence seq;
  seq.horizon = H;
  if (cfg.c5 < 1.0) return seq;  // R = 0 after every candidate

  const auto lev = level_array(path, H);
  const auto sufmin = suffix_min(lev);

  // record[n]: lev[n] exceeds every earlier level.
  std::vector<std::uint8_t> record(H + 1, 0);
  std::int64_t best = std::numeric_limits<std::int64_t>::min();
  for (std::size_t n = 0; n <= H; ++n) {
    record[n] = lev[n] > best ? 1 : 0;
    best = std::max(best, lev[n]);
  }
  // run[n]: consecutive coin-1 steps in +e1 ending at time n.
  std::vector<std::uint32_t> run(H + 1, 0);
  const MoveCode up = move_code(0, 1);
  for (std::size_t n = 1; n <= H; ++n)
    run[n] = (bits[n - 1] != 0 && moves[n - 1] == up) ? run[n - 1] + 1 : 0;

  // Level visit counts over [0, H] and the bound g(v) = v + 1 - k_min(v):
  // a candidate at level a keeps every level v > a within budget iff
  // a <= min_{v > a} g(v).
  const std::int64_t lo = *std::min_element(lev.begin(), lev.end());
  const std::int64_t hi = *std::max_element(lev.begin(), lev.end());
  std::vector<std::size_t> count(static_cast<std::size_t>(hi - lo + 1), 0);
  for (auto v : lev) ++count[static_cast<std::size_t>(v - lo)];
  std::vector<std::int64_t> gmin(count.size() + 1, std::numeric_limits<std::int64_t>::max());
  for (std::size_t i = count.size(); i-- > 0;) {
    const std::int64_t v = lo + static_cast<std::int64_t>(i);
    const std::int64_t g = count[i] == 0 ? std::numeric_limits<std::int64_t>::max()
                                         : v + 1 - min_radius(count[i], cfg.c5);
    gmin[i] = std::min(gmin[i + 1], g);
  }
  auto never_stopped = [&](std::size_t S) {
    if (sufmin[S + 1] <= lev[S]) return false;
    const auto i = static_cast<std::size_t>(lev[S] - lo) + 1;
    return gmin[i] >= lev[S];
  };
  // R o theta_S by direct scan; only called when it is finite.
  auto stopping_after = [&](std::size_t S) {
    std::vector<std::size_t> c{1};
    for (std::size_t t = S + 1; t <= H; ++t) {
      const std::int64_t j = lev[t] - lev[S];
      if (j <= 0) return t;
      const auto u = static_cast<std::size_t>(j);
      if (u >= c.size()) c.resize(u + 1, 0);
      if (static_cast<double>(++c[u]) > cfg.c5 * static_cast<double>((u + 1) * (u + 1))) return t;
    }
    fail(ErrorKind::solver, "inconsistent regeneration scan");
  };

  const auto L = static_cast<std::size_t>(cfg.L);
  std::size_t base = 0;
  for (;;) {
    std::size_t r = base;
    std::optional<std::size_t> tau;
    for (std::size_t n = std::max(r, base + L); n <= H;) {
      if (run[n] >= L && record[n - L]) {
        if (never_stopped(n)) {
          tau = n;
          break;
        }
        r = stopping_after(n);
        n = std::max(r, base + L);
        continue;
      }
      ++n;
    }
    if (!tau || H - *tau < cfg.margin) break;
    seq.records.push_back({*tau, path.position(*tau), std::nullopt, 0});
    base = *tau;
  }
  return seq;
}

SplitRepresentation::SplitRepresentation(std::vector<double> nu, std::vector<double> mu, double a)
    : nu_(std::move(nu)), mu_(std::move(mu)), a_(a) {
  if (!(a_ > 0.0 && a_ < 1.0)) fail(ErrorKind::precondition, "split parameter a must lie in (0, 1)");
  if (nu_.size() != mu_.size()) fail(ErrorKind::input_mismatch, "ν and μ have different supports");
  z_.resize(nu_.size());
  for (std::size_t i = 0; i < nu_.size(); ++i) {
    const double z = nu_[i] - a_ * mu_[i];
    if (z < -1e-15) fail(ErrorKind::precondition, "dν/dμ < a at atom " + std::to_string(i));
    z_[i] = std::max(0.0, z) / (1.0 - a_);
  }
}

std::vector<double> SplitRepresentation::mixture() const {
  std::vector<double> out(nu_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a_ * mu_[i] + (1.0 - a_) * z_[i];
  return out;
}

namespace {

std::size_t draw(const std::vector<double>& p, double u) {
  double cum = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    cum += p[i];
    last = i;
    if (u < cum) return i;
  }
  return last;
}

}  // namespace

std::size_t SplitRepresentation::sample(Rng& rng) const {
  const bool delta = rng.uniform() >= a_;
  const std::size_t pi = draw(mu_, rng.uniform());
  const std::size_t z = draw(z_, rng.uniform());
  return delta ? z : pi;
}

SplitRepresentation split_representation(const std::vector<double>& nu, const std::vector<double>& mu, double a) {
  return SplitRepresentation(nu, mu, a);
}

std::optional<std::size_t> SlabLaws::slot(const Site& x, const Site& y) const {
  if (y[0] - x[0] != spacing) return std::nullopt;
  std::size_t idx = 0;
  for (int i = 1; i < dim; ++i) {
    const std::int64_t off = y[i] - x[i];
    if (std::llabs(off) > W) return std::nullopt;
    idx = idx * static_cast<std::size_t>(2 * W + 1) + static_cast<std::size_t>(off + W);
  }
  return idx;
}

namespace {

struct SlabGrid {
  int d;
  Site x;
  std::int64_t W, z_lo, z_hi;  // interior rows z_lo..z_hi (offsets along e1)
  std::size_t lateral;          // (2W+1)^{d-1}

  std::size_t size() const { return lateral * static_cast<std::size_t>(z_hi - z_lo + 1); }
  std::size_t lateral_index(const Site& s) const {
    std::size_t idx = 0;
    for (int i = 1; i < d; ++i) idx = idx * static_cast<std::size_t>(2 * W + 1) + static_cast<std::size_t>(s[i] - x[i] + W);
    return idx;
  }
  bool lateral_inside(const Site& s) const {
    for (int i = 1; i < d; ++i)
      if (std::llabs(s[i] - x[i]) > W) return false;
    return true;
  }
  std::size_t index(const Site& s) const {
    return static_cast<std::size_t>(s[0] - x[0] - z_lo) * lateral + lateral_index(s);
  }
  Site site(std::size_t idx) const {
    Site s = x;
    std::size_t lat = idx % lateral;
    s[0] = x[0] + z_lo + static_cast<std::int64_t>(idx / lateral);
    for (int i = d - 1; i >= 1; --i) {
      s[i] = x[i] + static_cast<std::int64_t>(lat % static_cast<std::size_t>(2 * W + 1)) - W;
      lat /= static_cast<std::size_t>(2 * W + 1);
    }
    return s;
  }
};

struct SlabMass {
  std::vector<double> top;
  double bottom = 0.0;
  double lateral = 0.0;
};

/// Exit distribution of the walk started at `start` from the grid's interior.
SlabMass slab_exit(const Environment& env, const SlabGrid& g, const Site& start) {
  const std::size_t n = g.size();
  const int d = g.d;
  std::vector<Triplet> t;
  t.reserve(n * static_cast<std::size_t>(2 * d + 1));
  std::vector<TransitionKernel> kernels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Site z = g.site(i);
    kernels[i] = env.kernel(z);
    const auto col = static_cast<std::ptrdiff_t>(i);
    t.emplace_back(col, col, 1.0 - kernels[i].p_hold);
    for (int m = 1; m <= 2 * d; ++m) {
      const double p = kernels[i].prob(static_cast<MoveCode>(m));
      if (p == 0.0) continue;
      const Site y = z + move_vector(static_cast<MoveCode>(m));
      const std::int64_t off = y[0] - g.x[0];
      if (off < g.z_lo || off > g.z_hi || !g.lateral_inside(y)) continue;
      // Transposed system: G^T (I - P) = e_start^T.
      t.emplace_back(static_cast<std::ptrdiff_t>(g.index(y)), col, -p);
    }
  }
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 1);
  rhs(static_cast<Eigen::Index>(g.index(start)), 0) = 1.0;
  const Eigen::MatrixXd green = sparse_solve(n, t, rhs);
  SlabMass out;
  out.top.assign(g.lateral, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = green(static_cast<Eigen::Index>(i), 0);
    if (gi == 0.0) continue;
    const Site z = g.site(i);
    for (int m = 1; m <= 2 * d; ++m) {
      const double p = kernels[i].prob(static_cast<MoveCode>(m));
      if (p == 0.0) continue;
      const Site y = z + move_vector(static_cast<MoveCode>(m));
      const std::int64_t off = y[0] - g.x[0];
      if (!g.lateral_inside(y))
        out.lateral += gi * p;
      else if (off > g.z_hi)
        out.top[g.lateral_index(y)] += gi * p;
      else if (off < g.z_lo)
        out.bottom += gi * p;
    }
  }
  return out;
}

}  // namespace

SlabLaws slab_hitting_distributions(const Environment& env, const Site& x, std::int64_t spacing,
                                    const SlabOptions& opts) {
  if (spacing < 2 || spacing % 2 != 0) fail(ErrorKind::domain, "level spacing 1/λ₁ must be a positive even integer");
  if (opts.W < 0) fail(ErrorKind::domain, "slab half-width must be nonnegative");
  const int d = env.dim();
  const std::int64_t W = opts.W > 0 ? opts.W : std::max<std::int64_t>(40, 12 * spacing);
  SlabGrid g{d, x, W, 0, spacing - 1, 1};
  for (int i = 1; i < d; ++i) g.lateral *= static_cast<std::size_t>(2 * W + 1);

  SlabLaws out;
  out.dim = d;
  out.spacing = spacing;
  out.W = W;
  out.targets.resize(g.lateral);
  for (std::size_t i = 0; i < g.lateral; ++i) {
    out.targets[i] = g.site(i);
    out.targets[i][0] = x[0] + spacing;
  }

  std::int64_t depth = opts.depth > 0 ? opts.depth : 8 * spacing;
  const bool adaptive = opts.depth <= 0;
  SlabMass fwd;
  for (;;) {
    g.z_lo = -depth + 1;
    fwd = slab_exit(env, g, x);
    if (fwd.bottom + fwd.lateral <= opts.deficit_tol || !adaptive || fwd.bottom <= opts.deficit_tol / 2 ||
        depth >= 64 * spacing)
      break;
    depth *= 2;
  }
  out.forward = fwd.top;
  out.forward_deficit = fwd.bottom + fwd.lateral;

  g.z_lo = 1;
  Site mid = x;
  mid[0] += spacing / 2;
  const SlabMass half = slab_exit(env, g, mid);
  const double up = std::accumulate(half.top.begin(), half.top.end(), 0.0);
  if (!(up > 0.0)) fail(ErrorKind::degenerate_site, "upper level unreachable from " + to_string(x, d));
  out.mu1.resize(half.top.size());
  for (std::size_t i = 0; i < half.top.size(); ++i) out.mu1[i] = half.top[i] / up;
  out.mu1_deficit = half.lateral / (up + half.lateral);

  if (out.forward_deficit > opts.deficit_tol || out.mu1_deficit > opts.deficit_tol)
    fail(ErrorKind::truncation, "slab truncation too small at " + to_string(x, d) + ": deficits " +
                                    std::to_string(out.forward_deficit) + ", " + std::to_string(out.mu1_deficit));
  return out;
}

double min_ratio(const SlabLaws& laws) {
  double c = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < laws.mu1.size(); ++i)
    if (laws.mu1[i] > 1e-12) c = std::min(c, laws.forward[i] / laws.mu1[i]);
  return c;
}

C1Estimate estimate_c1(const Environment& env, std::int64_t spacing, const SlabOptions& opts,
                       const std::vector<Site>& sites, int workers) {
  if (sites.empty()) fail(ErrorKind::sample_size, "estimate_c1 needs at least one site");
  C1Estimate out;
  out.sites = sites;
  out.per_site = parallel_map<double>(sites.size(), workers, [&](std::size_t i) {
    return min_ratio(slab_hitting_distributions(env, sites[i], spacing, opts));
  });
  out.c1 = *std::min_element(out.per_site.begin(), out.per_site.end());
  return out;
}

std::int64_t BetaRegenConfig::spacing() const {
  return level_spacing(perturbation.lambda * perturbation.ell[0]);
}

void BetaRegenConfig::validate(int dim) const {
  perturbation.validate(dim);
  if (!(perturbation.lambda * perturbation.ell[0] > 0.0))
    fail(ErrorKind::config, "β-regenerations need λ ℓ₁ > 0");
  if (!(beta > 0.0 && beta < 1.0)) fail(ErrorKind::config, "β must lie in (0, 1)");
  if (horizon == 0) fail(ErrorKind::config, "horizon must be positive");
}

RegenerationSequence beta_regenerations_from_coins(const PathRecord& path, std::int64_t spacing,
                                                   const std::vector<std::uint8_t>& coins, std::size_t margin) {
  if (spacing < 1) fail(ErrorKind::domain, "level spacing must be positive");
  const std::size_t H = path.length();
  const auto lev = level_array(path, H);
  const auto sufmin = suffix_min(lev);
  const std::int64_t origin_level = lev[0];

  // First hitting times T_j of the levels origin + j s.
  std::vector<std::size_t> T{0};
  std::int64_t best = origin_level;
  for (std::size_t n = 1; n <= H; ++n) {
    if (lev[n] > best) {
      best = lev[n];
      if ((best - origin_level) % spacing == 0) T.push_back(n);
    }
  }
  RegenerationSequence seq;
  seq.horizon = H;

  std::size_t base_level = 0;  // level index of the current origin
  std::size_t base_time = 0;
  std::int64_t M = 0;          // relative to the current origin
  for (;;) {
    // Smallest level n with (n - base) s >= M, coin 1 and T_{n+1} on the path.
    std::size_t n = base_level + static_cast<std::size_t>((M + spacing - 1) / spacing);
    while (n + 1 < T.size() && !(n < coins.size() && coins[n] != 0)) ++n;
    if (n + 1 >= T.size()) break;
    const std::size_t S = T[n + 1];
    if (sufmin[S + 1] > lev[S] - spacing) {
      if (H - S < margin) break;
      seq.records.push_back({S, path.position(S), T[n], S - T[n]});
      base_level = n + 1;
      base_time = S;
      M = 0;
      continue;
    }
    std::int64_t top = lev[S];
    std::size_t t = S + 1;
    for (; lev[t] > lev[S] - spacing; ++t) top = std::max(top, lev[t]);
    const std::int64_t N = ((top - lev[S]) / spacing + 1) * spacing;
    M = lev[S] - lev[base_time] + N;
  }
  return seq;
}

BetaRegenRun detect_beta_regenerations(const Environment& drifted, const BetaRegenConfig& cfg, Rng& rng) {
  const int d = drifted.dim();
  cfg.validate(d);
  const std::int64_t s = cfg.spacing();
  BetaRegenRun run;
  run.path = PathRecord(d, origin());
  run.path.reserve(cfg.horizon);

  std::optional<SlabLaws> shared;
  if (cfg.translation_invariant) shared = slab_hitting_distributions(drifted, origin(), s, cfg.slab);

  Site x = origin();
  Site level_start = origin();  // X_{T_n}
  std::int64_t next_level = s;
  std::vector<std::uint8_t> bits;
  for (std::size_t n = 0; n < cfg.horizon; ++n) {
    const MoveCode m = sample_move(drifted.kernel(x), rng.uniform());
    run.path.push(m);
    x += move_vector(m);
    if (x[0] != next_level) continue;
    std::optional<SlabLaws> local;
    if (!shared) local = slab_hitting_distributions(drifted, level_start, s, cfg.slab);
    const SlabLaws& laws = shared ? *shared : *local;
    const auto slot = shared ? laws.slot(origin(), x - level_start) : laws.slot(level_start, x);
    double ratio = 0.0;
    if (slot && laws.mu1[*slot] > 0.0) {
      ratio = laws.forward[*slot] > 0.0 ? cfg.beta * laws.mu1[*slot] / laws.forward[*slot]
                                        : std::numeric_limits<double>::infinity();
      if (ratio > 1.0 + 1e-12)
        fail(ErrorKind::beta_too_large, "β μ₁/P = " + std::to_string(ratio) + " > 1 at " + to_string(x, d) +
                                            " from " + to_string(level_start, d));
    }
    const bool coin = rng.uniform() < ratio;
    run.coins.push_back({n + 1, x, ratio, coin});
    bits.push_back(coin ? 1 : 0);
    level_start = x;
    next_level += s;
  }
  run.sequence = beta_regenerations_from_coins(run.path, s, bits, cfg.margin);
  return run;
}

RegenDiagnostics regen_diagnostics(const std::vector<RegenerationSequence>& runs, const DiagnosticsConfig& cfg) {
  if (!(cfg.beta > 0.0 && cfg.lambda1 > 0.0 && cfg.kappa > 0.0 && cfg.c1 > 0.0))
    fail(ErrorKind::config, "diagnostics need positive β, λ₁, κ and c₁");
  RegenDiagnostics rep;
  // tau~_1 o theta_{tau_k} = tau~_{k+1} - tau_k for k >= 1; pairs stay within one walker.
  std::vector<double> incr;
  std::vector<std::size_t> pair_starts;
  std::vector<double> first_moment, deltas;
  std::uint64_t tails_total = 0;
  std::vector<double> first_tau;
  for (const auto& seq : runs) {
    rep.regenerations += seq.records.size();
    for (const auto& r : seq.records) deltas.push_back(cfg.lambda1 * cfg.lambda1 * static_cast<double>(r.delta));
    if (seq.records.empty()) {
      first_tau.push_back(std::numeric_limits<double>::infinity());
    } else {
      const auto& r1 = seq.records.front();
      first_tau.push_back(static_cast<double>(r1.tau));
      first_moment.push_back(std::exp(cfg.beta * cfg.lambda1 * static_cast<double>(r1.x[0]) / 2.0));
    }
    ++tails_total;
    for (std::size_t k = 1; k < seq.records.size(); ++k) {
      const auto& prev = seq.records[k - 1];
      const auto& cur = seq.records[k];
      if (!cur.tau_tilde) fail(ErrorKind::input_mismatch, "diagnostics need β-regeneration records");
      if (k >= 2) pair_starts.push_back(incr.size() - 1);
      incr.push_back(static_cast<double>(*cur.tau_tilde - prev.tau));
    }
  }
  rep.first_regenerations = first_moment.size();
  if (rep.regenerations < cfg.min_regenerations)
    fail(ErrorKind::sample_size, "only " + std::to_string(rep.regenerations) + " regenerations, need " +
                                     std::to_string(cfg.min_regenerations));
  if (pair_starts.empty() || first_moment.size() < 2)
    fail(ErrorKind::sample_size, "too few walkers with repeated regenerations");

  rep.independence_p = permutation_test_lag1(incr, pair_starts, cfg.shuffles, cfg.seed);
  rep.independence_ok = rep.independence_p > cfg.alpha;

  rep.exp_moment = sample_mean(first_moment);
  rep.exp_moment_ok = rep.exp_moment.hi() < 12.0;

  rep.tail_ok = true;
  for (double t : cfg.tail_t) {
    TailRow row;
    row.t = t;
    std::uint64_t c = 0;
    for (double tau : first_tau) c += cfg.beta * cfg.lambda1 * cfg.lambda1 * tau >= t ? 1 : 0;
    row.tail = proportion(c, tails_total);
    row.bound = 14.0 * std::exp(-cfg.kappa * cfg.kappa * std::sqrt(t) / 4.0);
    row.ok = row.tail.mean <= row.bound;
    rep.tail_ok = rep.tail_ok && row.ok;
    rep.tail.push_back(row);
  }

  rep.c2 = 2.0 / (cfg.kappa * cfg.kappa) * std::log(2.0 / cfg.c1);
  std::sort(deltas.begin(), deltas.end());
  rep.qq_ok = true;
  for (int i = 1; i <= 99; ++i) {
    QQRow q;
    q.p = i / 100.0;
    q.empirical = quantile_sorted(deltas, q.p);
    q.envelope = rep.c2 - std::log1p(-q.p) * 2.0 / (cfg.kappa * cfg.kappa);
    rep.qq_ok = rep.qq_ok && q.empirical <= q.envelope;
    rep.qq.push_back(q);
  }
  return rep;
}

nlohmann::json to_json(const RegenDiagnostics& d) {
  nlohmann::json j;
  j["regenerations"] = d.regenerations;
  j["first_regenerations"] = d.first_regenerations;
  j["independence"] = {{"p_value", d.independence_p}, {"ok", d.independence_ok}};
  j["exp_moment"] = {{"mean", d.exp_moment.mean},
                     {"stderr", d.exp_moment.stderr_},
                     {"upper", d.exp_moment.hi()},
                     {"bound", 12.0},
                     {"ok", d.exp_moment_ok}};
  auto& tail = j["tail"] = nlohmann::json::array();
  for (const auto& r : d.tail)
    tail.push_back({{"t", r.t}, {"empirical", r.tail.mean}, {"stderr", r.tail.stderr_}, {"bound", r.bound}, {"ok", r.ok}});
  j["tail_ok"] = d.tail_ok;
  j["c2"] = d.c2;
  auto& qq = j["qq"] = nlohmann::json::array();
  for (const auto& q : d.qq) qq.push_back({{"p", q.p}, {"empirical", q.empirical}, {"envelope", q.envelope}});
  j["qq_ok"] = d.qq_ok;
  return j;
}

HeatKernelReport heat_kernel_experiment(const HeatKernelConfig& cfg) {
  const WalkerSetup& s = cfg.setup;
  s.model.validate();
  s.perturbation.validate(s.model.dim);
  if (cfg.n_min < 1 || cfg.n_max < cfg.n_min) fail(ErrorKind::config, "need 1 ≤ n_min ≤ n_max");
  const int d = s.model.dim;
  const auto width = static_cast<std::size_t>(cfg.n_max - cfg.n_min + 1);
  LRegenConfig lc;
  lc.L = cfg.L;
  lc.c5 = cfg.c5;
  lc.kappa = cfg.coin_kappa;
  lc.margin = cfg.margin;

  // Per walker: X_{tau_n} for n in [n_min, n_max], d coordinates each; empty if censored.
  const auto ends = parallel_map<std::vector<std::int32_t>>(s.walkers, s.workers, [&](std::size_t w) {
    const EnvironmentModel m = s.averaging == Averaging::quenched ? s.model : s.model.with_seed(task_seed(s.seed, "env", w));
    const PerturbedEnvironment env(std::make_shared<ModelEnvironment>(m), s.perturbation);
    std::vector<std::int32_t> out;
    for (std::size_t H = cfg.initial_horizon; H <= cfg.max_horizon; H *= 2) {
      Rng rng(task_seed(s.seed, "walker", w));
      const PathRecord path = simulate_with_coins(env, cfg.coin_kappa, origin(), H, rng, task_seed(s.seed, "coin", w));
      const auto seq = detect_L_regenerations(path, lc);
      if (seq.size() < static_cast<std::size_t>(cfg.n_max)) continue;
      out.reserve(width * static_cast<std::size_t>(d));
      for (std::int64_t n = cfg.n_min; n <= cfg.n_max; ++n)
        for (int i = 0; i < d; ++i)
          out.push_back(static_cast<std::int32_t>(seq.records[static_cast<std::size_t>(n - 1)].x[i]));
      break;
    }
    return out;
  });

  HeatKernelReport rep;
  rep.walkers = s.walkers;
  for (const auto& e : ends) rep.censored += e.empty() ? 1 : 0;
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < width; ++k) {
    std::map<Site, std::uint64_t> counts;
    for (const auto& e : ends) {
      if (e.empty()) continue;
      Site x{};
      for (int i = 0; i < d; ++i) x[i] = e[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)];
      ++counts[x];
    }
    HeatKernelRow row;
    row.n = cfg.n_min + static_cast<std::int64_t>(k);
    std::uint64_t best = 0;
    for (const auto& [x, c] : counts)
      if (c > best) {
        best = c;
        row.argmax = x;
      }
    row.max_probability = static_cast<double>(best) / static_cast<double>(s.walkers);
    rep.rows.push_back(row);
    if (best > 0) {
      lx.push_back(std::log(static_cast<double>(row.n)));
      ly.push_back(std::log(row.max_probability));
    }
  }
  if (lx.size() >= 2) rep.slope = linear_fit(lx, ly).first;
  return rep;
}

}  // namespace rwre
