#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/lattice.hpp"
#include "rwre/rng.hpp"

namespace rwre {

/// Samples a move from the kernel using one uniform variate in [0, 1).
MoveCode sample_move(const TransitionKernel& k, double u);

/// Coin bits of the epsilon-coin decomposition. The coin at (step n, site z)
/// is a pure function of (seed, n, z); `bits` caches the coins met along one
/// path, bits[n] = coin(n, X_n).
struct CoinStream {
  std::uint64_t seed = 0;
  double prob = 0.0;  // d * kappa
  std::vector<std::uint8_t> bits;

  static bool coin(std::uint64_t seed, double prob, std::size_t n, const Site& z);
  bool at(std::size_t n, const Site& z) const { return coin(seed, prob, n, z); }
};

/// A trajectory stored as its move list with checkpointed positions.
class PathRecord {
 public:
  static constexpr std::size_t kCheckpointStride = 4096;

  PathRecord() = default;
  PathRecord(int dim, Site start);

  int dim() const { return dim_; }
  const Site& start() const { return start_; }
  std::size_t length() const { return moves_.size(); }
  const std::vector<MoveCode>& moves() const { return moves_; }
  const Site& end() const { return current_; }

  void push(MoveCode m);
  void reserve(std::size_t n) { moves_.reserve(n); }

  /// X_n for 0 <= n <= length().
  Site position(std::size_t n) const;
  /// All positions X_0..X_length.
  std::vector<Site> positions() const;
  /// X_n . e_axis for all n, relative to the start.
  std::vector<std::int64_t> levels(int axis = 0) const;

  std::optional<CoinStream> coins;

 private:
  int dim_ = 0;
  Site start_{};
  Site current_{};
  std::vector<MoveCode> moves_;
  std::vector<Site> checkpoints_;
};

/// Quenched walk of exactly n steps.
PathRecord simulate(const Environment& env, const Site& start, std::size_t n, Rng& rng);

/// Walk driven by the epsilon-coin decomposition with coin parameter kappa.
/// With coin 1 the step is uniform over the 2d neighbours; with coin 0 it
/// follows (w(z,e) - kappa/2)/(1 - d kappa). The marginal law of the path is
/// that of `simulate`.
PathRecord simulate_with_coins(const Environment& env, double kappa, const Site& start,
                               std::size_t n, Rng& rng, std::uint64_t coin_seed);

/// Law of one coin-decomposed step at z given coin c, as probabilities over
/// move codes 1..2d (index 0 unused).
std::vector<double> coin_step_law(const TransitionKernel& k, double kappa, bool coin);

struct ExitResult {
  std::size_t tau = 0;
  Site exit{};
  bool censored = false;  // budget exhausted; tau and exit are the partial state
};

/// First n with |X_n - centre|_2 > r, simulated live with a step budget.
ExitResult exit_time_ball(const Environment& env, const Site& centre, double r,
                          std::size_t budget, Rng& rng, bool throw_on_budget = true);

/// Same stopping rule evaluated on a recorded path.
ExitResult exit_time_ball(const PathRecord& path, double r);

/// E^centre tau(r) by a direct sparse solve of the absorption problem.
double expected_exit_time_exact(const Environment& env, const Site& centre, double r);

/// Index of the first n with (X_n - X_0).e_axis = displacement.
std::optional<std::size_t> first_hitting_level(const PathRecord& path, std::int64_t displacement,
                                               int axis = 0);

/// T_n = inf{t: (X_t - X_0).e_axis = n * spacing} for n = 0..n_max (nullopt
/// where the level is not reached within the path).
std::vector<std::optional<std::size_t>> level_hitting_times(const PathRecord& path, std::int64_t spacing,
                                                            std::size_t n_max, int axis = 0);

/// Visit structure of the levels H_i = {x: x.e1 = X_0.e1 + i}, i >= 0, up to
/// the highest level whose hitting time lies inside the path.
class LevelStats {
 public:
  LevelStats() = default;
  explicit LevelStats(const PathRecord& path, int axis = 0);

  /// Highest level j with T_j inside the path.
  std::int64_t max_level() const { return static_cast<std::int64_t>(first_.size()) - 1; }
  std::size_t T(std::int64_t i) const { return first_.at(static_cast<std::size_t>(i)); }
  /// Number of visits to H_i before T_j (0 <= i < j <= max_level()).
  std::size_t N(std::int64_t i, std::int64_t j) const;
  /// Time between the first and the last visits to H_i before T_{i+l}.
  std::size_t h(std::int64_t i, std::int64_t l) const;
  double H(std::int64_t m, std::int64_t l) const;
  /// Fraction of m in [0, M] with h_{m,l} <= a and H_{m,l} <= a. Requires
  /// M + l <= max_level().
  double E(std::int64_t M, std::int64_t l, double a) const;

  void write_csv(std::ostream& out, std::int64_t l) const;

 private:
  const std::vector<std::size_t>& visits(std::int64_t i) const { return visits_.at(static_cast<std::size_t>(i)); }
  void check(std::int64_t i, std::int64_t j) const;

  std::vector<std::size_t> first_;
  std::vector<std::vector<std::size_t>> visits_;
};

/// R = first n at which some level j >= 0 has been visited more than
/// c5 (j+1)^2 times, capped by D = inf{n >= 1: X_n.e1 <= X_0.e1}. nullopt
/// means neither happened within the path.
std::optional<std::size_t> stopping_R(const PathRecord& path, double c5, int axis = 0);

/// Visits to the start at times 1..h for each horizon h (ascending).
std::vector<std::uint64_t> visits_to_start(const Environment& env, const Site& start,
                                           const std::vector<std::size_t>& horizons, Rng& rng);

/// Binary dump: magic, version, dim, start, seed, environment descriptor and
/// the moves packed two per byte.
void write_path(std::ostream& out, const PathRecord& path, std::uint64_t seed, const std::string& env_descriptor);
struct PathDump {
  PathRecord path;
  std::uint64_t seed = 0;
  std::string env_descriptor;
};
PathDump read_path(std::istream& in);

}  // namespace rwre
