#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "rwre/elliptic.hpp"
#include "rwre/environment.hpp"
#include "rwre/stationary.hpp"
#include "rwre/stats.hpp"

namespace rwre {

/// A site is open when min_i w(x, e_i) < eps0.
bool is_open(const TransitionKernel& k, double eps0);

struct Cluster {
  std::vector<Site> sites;     // sorted
  std::vector<Site> boundary;  // outer l1 neighbours, sorted
  std::int64_t diameter = 0;   // sup_{x in B, y in dB} |x - y|_1
  bool censored = false;       // some boundary site lies outside the window
};

/// Open/closed classification and cluster structure over a finite window.
class ClusterMap {
 public:
  ClusterMap() = default;
  ClusterMap(Box window, double eps0, std::vector<std::uint8_t> open, std::vector<std::int32_t> label,
             std::vector<Cluster> clusters);

  const Box& window() const { return window_; }
  double eps0() const { return eps0_; }
  bool open(const Site& s) const { return window_.contains(s) && open_[window_.index(s)] != 0; }
  /// Cluster label of an open site in the window, -1 otherwise.
  std::int32_t label(const Site& s) const { return window_.contains(s) ? label_[window_.index(s)] : -1; }
  const std::vector<Cluster>& clusters() const { return clusters_; }
  const Cluster* cluster_of(const Site& s) const;
  /// l_x: diameter of the cluster containing x, 0 for closed x.
  std::int64_t l(const Site& s) const;
  std::size_t open_count() const;

 private:
  Box window_;
  double eps0_ = 0.0;
  std::vector<std::uint8_t> open_;
  std::vector<std::int32_t> label_;
  std::vector<Cluster> clusters_;
};

/// Union-find labelling of the open sites of `window`.
ClusterMap classify_and_cluster(const Environment& env, const Box& window, double eps0);

struct QnRow {
  std::int64_t n = 0;
  std::uint64_t trials = 0;
  std::uint64_t hits = 0;
  Estimate q;
};

struct QnTable {
  std::vector<QnRow> rows;
  double phi = 0.0;          // fitted decay rate of -log q_n against n
  bool phi_defined = false;  // at least two n with hits
  bool all_percolate = false;
  const QnRow& at(std::int64_t n) const;
};

/// Annealed Monte Carlo estimate of q_n = P(o -> S_n): o open and the closure
/// of its cluster reaches the sphere |x|_inf = n. Each trial uses a fresh
/// environment seed.
QnTable estimate_qn(const EnvironmentModel& model, double eps0, const std::vector<std::int64_t>& n_list,
                    std::uint64_t trials, std::uint64_t master_seed, int workers = 1);

/// |S_m| = (2m+1)^d - (2m-1)^d.
std::uint64_t sphere_size(int dim, std::int64_t m);

struct SubadditivityRow {
  std::int64_t m = 0;
  std::int64_t n = 0;
  Estimate q_sum;      // q_{m+n}
  double upper = 0.0;  // |S_m| q_m q_n at the upper confidence limits
  double lower = 0.0;  // q_m q_n / (2d |S_m|) at the lower confidence limits
  bool upper_ok = true;
  bool lower_ok = true;
};

/// q_{m+n} <= |S_m| q_m q_n and q_{m+n} >= q_m q_n / (2d |S_m|), compared at
/// 3 standard errors. The table must contain m, n and m + n.
std::vector<SubadditivityRow> subadditivity_checks(const QnTable& table, int dim,
                                                   const std::vector<std::pair<std::int64_t, std::int64_t>>& pairs);

struct KappaPath {
  std::array<int, kMaxDim> kappa{};
  std::vector<Site> sites;  // x ... y_kappa
  Site target() const { return sites.back(); }
};

struct LambdaSet {
  Site base{};
  std::vector<KappaPath> paths;  // one per sign vector, in lexicographic order of kappa
  std::vector<Site> sites;       // union of path points, sorted
  bool contains(const Site& s) const;
};

/// Extremal kappa-paths from x through the closure of its cluster. Steps must
/// be kappa-monotone with probability >= xi0; each path ends at the first
/// boundary site reached and the farthest such endpoint (l1 distance, then
/// lexicographic order) is kept. Closed x gives Lambda_x = {x}.
LambdaSet build_lambda(const Environment& env, const ClusterMap& clusters, const Site& x, double xi0);

/// a(x, y) = P^x(X_{tau_Lambda} = y) with tau_Lambda = inf{n > 0: X_n not in Lambda_x}.
std::vector<Jump> exit_kernel(const Environment& env, const LambdaSet& lambda);

struct CornerCheck {
  Site target{};
  double a = 0.0;
  double bound = 0.0;
  bool ok = true;
};

/// a(x, y_kappa +- e_i) >= (1/2d)^{l_x} eps0 for every y_kappa +- e_i outside Lambda_x.
std::vector<CornerCheck> check_corner_bound(int dim, const std::vector<Jump>& kernel, const LambdaSet& lambda,
                                            std::int64_t l_x, double eps0);

struct PhiControlRow {
  Site x{};
  std::int64_t l = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool skipped = false;  // l_x > N
  bool ok = true;
};

struct PhiControlReport {
  std::vector<PhiControlRow> rows;
  std::size_t violations = 0;
  std::size_t skipped = 0;
};

/// Phi_N(x) <= xi0^{-l_x} sum_{y in dA_x cap Delta_N} Phi_N(y) for open x in
/// Delta_N with l_x <= N. Clusters come from the infinite environment.
PhiControlReport check_phi_control(const StationaryDensity& phi, const ClusterMap& clusters, double xi0);

}  // namespace rwre
