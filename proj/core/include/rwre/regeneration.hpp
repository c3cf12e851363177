#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rwre/einstein.hpp"
#include "rwre/environment.hpp"
#include "rwre/rng.hpp"
#include "rwre/stats.hpp"
#include "rwre/walk.hpp"

namespace rwre {

struct LRegenConfig {
  int L = 2;         // straight-run length
  double c5 = 50.0;  // level-visit budget of R
  double kappa = 0.1;
  std::size_t horizon = 0;  // 0 means the whole path
  std::size_t margin = 0;   // regenerations need this many checked steps after them

  void validate() const;
};

struct RegenerationRecord {
  std::size_t tau = 0;
  Site x{};
  std::optional<std::size_t> tau_tilde;  // beta-regenerations only
  std::size_t delta = 0;                 // tau - tau_tilde
};

/// Regeneration times found on a finite path. The "never backtrack" part of
/// each record is verified on the remaining horizon only; `censored` is set
/// when the search for the next regeneration ran out of path.
struct RegenerationSequence {
  std::vector<RegenerationRecord> records;
  bool censored = true;
  std::size_t horizon = 0;

  std::size_t size() const { return records.size(); }
};

/// L-regenerations tau_1 = S_K, tau_{k+1} = tau_k + tau_1 o theta_{tau_k}.
RegenerationSequence detect_L_regenerations(const PathRecord& path, const LRegenConfig& cfg);

/// Splitting X = (1 - Delta) pi + Delta Z with P(Delta = 1) = 1 - a, pi ~ mu
/// and Z ~ (nu - a mu)/(1 - a).
class SplitRepresentation {
 public:
  SplitRepresentation(std::vector<double> nu, std::vector<double> mu, double a);

  double a() const { return a_; }
  const std::vector<double>& nu() const { return nu_; }
  const std::vector<double>& pi_law() const { return mu_; }
  const std::vector<double>& z_law() const { return z_; }
  /// Law of X rebuilt as a mu + (1 - a) Z.
  std::vector<double> mixture() const;
  /// One draw of X through (Delta, pi, Z).
  std::size_t sample(Rng& rng) const;

 private:
  std::vector<double> nu_, mu_, z_;
  double a_;
};

SplitRepresentation split_representation(const std::vector<double>& nu, const std::vector<double>& mu, double a);

struct SlabOptions {
  std::int64_t W = 0;         // lateral half-width; 0 picks max(40, 12 spacings)
  std::int64_t depth = 0;     // forward law: lower cut-off below x; 0 picks 8 spacings
  double deficit_tol = 1e-6;  // larger deficits throw ErrorKind::truncation
};

/// Hitting laws on the level one spacing above x. Targets are indexed by the
/// lateral offset over [-W, W]^{d-1} in lexicographic order.
struct SlabLaws {
  int dim = 0;
  std::int64_t spacing = 0;
  std::int64_t W = 0;
  std::vector<Site> targets;
  std::vector<double> forward;  // P^x(X_{T_1} = y)
  std::vector<double> mu1;      // P^{x + s/2 e1}(X_{T_{0.5}} = y | T_{0.5} < T_{-0.5})
  double forward_deficit = 0.0;
  double mu1_deficit = 0.0;

  /// Index of target y, if it lies in the truncated cross-section.
  std::optional<std::size_t> slot(const Site& x, const Site& y) const;
};

SlabLaws slab_hitting_distributions(const Environment& env, const Site& x, std::int64_t spacing,
                                    const SlabOptions& opts = {});

/// min over sites and targets with mu1 > 1e-12 of forward / mu1.
double min_ratio(const SlabLaws& laws);

struct C1Estimate {
  double c1 = 0.0;
  std::vector<Site> sites;
  std::vector<double> per_site;
};

C1Estimate estimate_c1(const Environment& env, std::int64_t spacing, const SlabOptions& opts,
                       const std::vector<Site>& sites, int workers = 1);

struct BetaRegenConfig {
  double beta = 0.05;
  PerturbationParams perturbation;
  SlabOptions slab;
  std::size_t horizon = 1000000;
  std::size_t margin = 0;
  /// Reuse the slab laws of the origin at every site (homogeneous models).
  bool translation_invariant = false;

  /// 1 / lambda_1.
  std::int64_t spacing() const;
  void validate(int dim) const;
};

/// Coin tossed at the first visit of level n + 1 (n >= 0).
struct LevelCoin {
  std::size_t time = 0;  // T_{n+1}
  Site hit{};
  double ratio = 0.0;    // beta mu1(y) / forward(y)
  bool coin = false;
};

struct BetaRegenRun {
  PathRecord path;
  std::vector<LevelCoin> coins;  // coins[n] = epsilon_n
  RegenerationSequence sequence;
};

/// Simulates the walk in the drifted environment `drifted` from the origin
/// for cfg.horizon steps, tosses the level coins a posteriori and detects the
/// beta-regenerations.
BetaRegenRun detect_beta_regenerations(const Environment& drifted, const BetaRegenConfig& cfg, Rng& rng);

/// Detection on a given path and coin sequence (coins[n] = epsilon_n).
RegenerationSequence beta_regenerations_from_coins(const PathRecord& path, std::int64_t spacing,
                                                   const std::vector<std::uint8_t>& coins, std::size_t margin = 0);

struct DiagnosticsConfig {
  double beta = 0.0;
  double lambda1 = 0.0;
  double kappa = 0.0;
  double c1 = 0.0;
  std::size_t shuffles = 10000;
  double alpha = 0.01;
  std::vector<double> tail_t{1, 4, 9, 16};
  std::uint64_t seed = 0;
  std::size_t min_regenerations = 500;
};

struct TailRow {
  double t = 0.0;
  Estimate tail;
  double bound = 0.0;
  bool ok = true;
};

struct QQRow {
  double p = 0.0;
  double empirical = 0.0;
  double envelope = 0.0;
};

struct RegenDiagnostics {
  std::size_t regenerations = 0;
  std::size_t first_regenerations = 0;
  double independence_p = 0.0;
  bool independence_ok = false;
  Estimate exp_moment;
  bool exp_moment_ok = false;
  std::vector<TailRow> tail;
  bool tail_ok = false;
  double c2 = 0.0;
  std::vector<QQRow> qq;
  bool qq_ok = false;
};

/// Diagnostics over independent walkers' sequences (each from the origin).
RegenDiagnostics regen_diagnostics(const std::vector<RegenerationSequence>& runs, const DiagnosticsConfig& cfg);

nlohmann::json to_json(const RegenDiagnostics& d);

struct HeatKernelConfig {
  WalkerSetup setup;
  double coin_kappa = 0.1;
  int L = 1;
  double c5 = 50.0;
  std::int64_t n_min = 8;
  std::int64_t n_max = 64;
  std::size_t margin = 2000;       // steps checked after tau_{n_max}
  std::size_t initial_horizon = 4096;
  std::size_t max_horizon = 1u << 24;
};

struct HeatKernelRow {
  std::int64_t n = 0;
  double max_probability = 0.0;
  Site argmax{};
};

struct HeatKernelReport {
  std::vector<HeatKernelRow> rows;
  double slope = 0.0;
  std::uint64_t walkers = 0;
  std::uint64_t censored = 0;
};

/// max_x P(X_{tau_n} = x) for L-regenerations and its log-log slope in n.
HeatKernelReport heat_kernel_experiment(const HeatKernelConfig& cfg);

}  // namespace rwre
