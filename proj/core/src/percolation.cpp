#include "rwre/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <unordered_set>

#include "rwre/error.hpp"
#include "rwre/parallel.hpp"
#include "rwre/rng.hpp"
#include "rwre/sparse.hpp"

namespace rwre {

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
  std::size_t find(std::size_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

std::array<int, kMaxDim> kappa_from_mask(int dim, int mask) {
  std::array<int, kMaxDim> k{};
  for (int i = 0; i < dim; ++i) k[static_cast<std::size_t>(i)] = (mask >> i) & 1 ? -1 : 1;
  return k;
}

}  // namespace

bool is_open(const TransitionKernel& k, double eps0) {
  for (int i = 0; i < k.dim; ++i)
    if (k.p_plus[i] < eps0) return true;
  return false;
}

ClusterMap::ClusterMap(Box window, double eps0, std::vector<std::uint8_t> open, std::vector<std::int32_t> label,
                       std::vector<Cluster> clusters)
    : window_(window), eps0_(eps0), open_(std::move(open)), label_(std::move(label)), clusters_(std::move(clusters)) {}

const Cluster* ClusterMap::cluster_of(const Site& s) const {
  const auto l = label(s);
  return l < 0 ? nullptr : &clusters_[static_cast<std::size_t>(l)];
}

std::int64_t ClusterMap::l(const Site& s) const {
  const Cluster* c = cluster_of(s);
  return c ? c->diameter : 0;
}

std::size_t ClusterMap::open_count() const {
  return static_cast<std::size_t>(std::count(open_.begin(), open_.end(), std::uint8_t{1}));
}

ClusterMap classify_and_cluster(const Environment& env, const Box& window, double eps0) {
  const int d = window.dim();
  const std::size_t n = window.size();
  std::vector<std::uint8_t> open(n, 0);
  for (std::size_t i = 0; i < n; ++i) open[i] = is_open(env.kernel(window.site(i)), eps0) ? 1 : 0;
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!open[i]) continue;
    const Site s = window.site(i);
    for (int a = 0; a < d; ++a) {
      const Site t = s + unit(a);
      if (window.contains(t) && open[window.index(t)]) uf.unite(i, window.index(t));
    }
  }
  std::vector<std::int32_t> label(n, -1);
  std::vector<Cluster> clusters;
  std::vector<std::int32_t> root_label(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!open[i]) continue;
    const std::size_t r = uf.find(i);
    if (root_label[r] < 0) {
      root_label[r] = static_cast<std::int32_t>(clusters.size());
      clusters.emplace_back();
    }
    label[i] = root_label[r];
    clusters[static_cast<std::size_t>(label[i])].sites.push_back(window.site(i));
  }
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    Cluster& cl = clusters[c];
    std::sort(cl.sites.begin(), cl.sites.end());
    std::unordered_set<Site, SiteHash> bd;
    for (const Site& s : cl.sites)
      for (int m = 1; m <= 2 * d; ++m) {
        const Site t = s + move_vector(static_cast<MoveCode>(m));
        if (window.contains(t) && label[window.index(t)] == static_cast<std::int32_t>(c)) continue;
        bd.insert(t);
      }
    cl.boundary.assign(bd.begin(), bd.end());
    std::sort(cl.boundary.begin(), cl.boundary.end());
    for (const Site& y : cl.boundary) {
      if (!window.contains(y)) cl.censored = true;
      for (const Site& x : cl.sites) cl.diameter = std::max(cl.diameter, dist1(x, y));
    }
  }
  return ClusterMap(window, eps0, std::move(open), std::move(label), std::move(clusters));
}

const QnRow& QnTable::at(std::int64_t n) const {
  for (const auto& r : rows)
    if (r.n == n) return r;
  fail(ErrorKind::domain, "q_n not estimated for n = " + std::to_string(n));
}

std::uint64_t sphere_size(int dim, std::int64_t m) {
  if (m == 0) return 1;
  std::uint64_t outer = 1, inner = 1;
  for (int i = 0; i < dim; ++i) {
    outer *= static_cast<std::uint64_t>(2 * m + 1);
    inner *= static_cast<std::uint64_t>(2 * m - 1);
  }
  return outer - inner;
}

QnTable estimate_qn(const EnvironmentModel& model, double eps0, const std::vector<std::int64_t>& n_list,
                    std::uint64_t trials, std::uint64_t master_seed, int workers) {
  model.validate();
  if (n_list.empty() || trials == 0) fail(ErrorKind::sample_size, "estimate_qn needs n values and trials");
  const std::int64_t n_max = *std::max_element(n_list.begin(), n_list.end());
  const int d = model.dim;
  // reach[t] = largest |z|_inf over the closure of the origin's cluster, capped at n_max.
  const auto reach = parallel_map<std::int64_t>(trials, workers, [&](std::size_t t) -> std::int64_t {
    const EnvironmentModel m = model.with_seed(task_seed(master_seed, "qn", t));
    if (!is_open(sample_site(m, origin()), eps0)) return -1;
    std::unordered_set<Site, SiteHash> seen{origin()};
    std::deque<Site> queue{origin()};
    std::int64_t r = 0;
    while (!queue.empty()) {
      const Site z = queue.front();
      queue.pop_front();
      for (int mv = 1; mv <= 2 * d; ++mv) {
        const Site w = z + move_vector(static_cast<MoveCode>(mv));
        r = std::max(r, norm_inf(w));
        if (r >= n_max) return n_max;
        if (seen.count(w)) continue;
        seen.insert(w);
        if (is_open(sample_site(m, w), eps0)) queue.push_back(w);
      }
    }
    return r;
  });
  QnTable table;
  std::vector<double> xs, ys;
  bool all = true;
  for (std::int64_t n : n_list) {
    QnRow row;
    row.n = n;
    row.trials = trials;
    for (auto r : reach)
      if (r >= n) ++row.hits;
    row.q = proportion(row.hits, trials);
    if (row.hits < trials) all = false;
    if (row.hits > 0) {
      xs.push_back(static_cast<double>(n));
      ys.push_back(-std::log(row.q.mean));
    }
    table.rows.push_back(row);
  }
  table.all_percolate = all;
  if (xs.size() >= 2) {
    table.phi = linear_fit(xs, ys).first;
    table.phi_defined = true;
  }
  return table;
}

std::vector<SubadditivityRow> subadditivity_checks(const QnTable& table, int dim,
                                                   const std::vector<std::pair<std::int64_t, std::int64_t>>& pairs) {
  std::vector<SubadditivityRow> out;
  for (const auto& [m, n] : pairs) {
    SubadditivityRow r;
    r.m = m;
    r.n = n;
    r.q_sum = table.at(m + n).q;
    const Estimate qm = table.at(m).q, qn = table.at(n).q;
    const auto sm = static_cast<double>(sphere_size(dim, m));
    r.upper = sm * std::min(1.0, qm.hi()) * std::min(1.0, qn.hi());
    r.lower = std::max(0.0, qm.lo()) * std::max(0.0, qn.lo()) / (2.0 * dim * sm);
    r.upper_ok = r.q_sum.lo() <= r.upper;
    r.lower_ok = r.q_sum.hi() >= r.lower;
    out.push_back(r);
  }
  return out;
}

bool LambdaSet::contains(const Site& s) const { return std::binary_search(sites.begin(), sites.end(), s); }

LambdaSet build_lambda(const Environment& env, const ClusterMap& clusters, const Site& x, double xi0) {
  const int d = env.dim();
  LambdaSet out;
  out.base = x;
  const std::int32_t lab = clusters.label(x);
  if (lab < 0) {
    out.sites = {x};
    return out;
  }
  const Cluster& cl = clusters.clusters()[static_cast<std::size_t>(lab)];
  if (cl.censored) fail(ErrorKind::precondition, "build_lambda: cluster of " + to_string(x, d) + " touches the window edge");
  std::unordered_set<Site, SiteHash> members;
  for (int mask = 0; mask < (1 << d); ++mask) {
    const auto kappa = kappa_from_mask(d, mask);
    std::unordered_map<Site, Site, SiteHash> parent;
    std::deque<Site> queue{x};
    parent.emplace(x, x);
    std::optional<Site> best;
    while (!queue.empty()) {
      const Site z = queue.front();
      queue.pop_front();
      const TransitionKernel k = env.kernel(z);
      for (int i = 0; i < d; ++i) {
        const int s = kappa[static_cast<std::size_t>(i)];
        const double p = s > 0 ? k.p_plus[i] : k.p_minus[i];
        if (p < xi0) continue;
        const Site w = z + unit(i, s);
        if (parent.count(w)) continue;
        parent.emplace(w, z);
        if (clusters.label(w) == lab) {
          queue.push_back(w);
        } else if (!best || dist1(w, x) > dist1(*best, x) || (dist1(w, x) == dist1(*best, x) && w < *best)) {
          best = w;
        }
      }
    }
    if (!best)
      fail(ErrorKind::model_violation, "no kappa-path from " + to_string(x, d) + " with steps of probability ≥ ξ₀");
    KappaPath path;
    path.kappa = kappa;
    for (Site v = *best;; v = parent.at(v)) {
      path.sites.push_back(v);
      if (v == x) break;
    }
    std::reverse(path.sites.begin(), path.sites.end());
    members.insert(path.sites.begin(), path.sites.end());
    out.paths.push_back(std::move(path));
  }
  out.sites.assign(members.begin(), members.end());
  std::sort(out.sites.begin(), out.sites.end());
  return out;
}

std::vector<Jump> exit_kernel(const Environment& env, const LambdaSet& lambda) {
  const int d = env.dim();
  const auto& sites = lambda.sites;
  const std::size_t n = sites.size();
  std::vector<Site> targets;
  std::vector<Triplet> t;
  std::vector<std::tuple<std::size_t, std::size_t, double>> out_mass;
  for (std::size_t a = 0; a < n; ++a) {
    const TransitionKernel k = env.kernel(sites[a]);
    t.emplace_back(static_cast<std::ptrdiff_t>(a), static_cast<std::ptrdiff_t>(a), 1.0 - k.p_hold);
    for (int m = 1; m <= 2 * d; ++m) {
      const double p = k.prob(static_cast<MoveCode>(m));
      if (p <= 0.0) continue;
      const Site w = sites[a] + move_vector(static_cast<MoveCode>(m));
      const auto it = std::lower_bound(sites.begin(), sites.end(), w);
      if (it != sites.end() && *it == w) {
        t.emplace_back(static_cast<std::ptrdiff_t>(a), static_cast<std::ptrdiff_t>(it - sites.begin()), -p);
      } else {
        auto tt = std::find(targets.begin(), targets.end(), w);
        if (tt == targets.end()) {
          targets.push_back(w);
          tt = targets.end() - 1;
        }
        out_mass.emplace_back(a, static_cast<std::size_t>(tt - targets.begin()), p);
      }
    }
  }
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(targets.size()));
  for (const auto& [a, b, p] : out_mass) rhs(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += p;
  const Eigen::MatrixXd h = sparse_solve(n, t, rhs);
  const auto row = static_cast<Eigen::Index>(std::lower_bound(sites.begin(), sites.end(), lambda.base) - sites.begin());
  std::vector<Jump> out;
  for (std::size_t b = 0; b < targets.size(); ++b) out.push_back({targets[b], h(row, static_cast<Eigen::Index>(b))});
  std::sort(out.begin(), out.end(), [](const Jump& a, const Jump& b) { return a.to < b.to; });
  return out;
}

std::vector<CornerCheck> check_corner_bound(int d, const std::vector<Jump>& kernel, const LambdaSet& lambda,
                                            std::int64_t l_x, double eps0) {
  std::vector<CornerCheck> out;
  const double bound = std::pow(1.0 / (2.0 * d), static_cast<double>(l_x)) * eps0;
  for (const auto& p : lambda.paths) {
    for (int i = 0; i < d; ++i)
      for (int s : {1, -1}) {
        const Site t = p.target() + unit(i, s);
        if (lambda.contains(t)) continue;
        double a = 0.0;
        for (const auto& j : kernel)
          if (j.to == t) a = j.weight;
        out.push_back({t, a, bound, a >= bound * (1.0 - 1e-12)});
      }
  }
  return out;
}

PhiControlReport check_phi_control(const StationaryDensity& phi, const ClusterMap& clusters, double xi0) {
  PhiControlReport rep;
  const Box& box = phi.box;
  const std::int64_t N = -box.lo();
  for (std::size_t i = 0; i < box.size(); ++i) {
    const Site x = box.site(i);
    const Cluster* c = clusters.cluster_of(x);
    if (!c) {
      if (!clusters.window().contains(x)) fail(ErrorKind::precondition, "cluster window must cover the torus box");
      continue;
    }
    PhiControlRow row;
    row.x = x;
    row.l = c->diameter;
    row.lhs = phi.phi[i];
    if (c->censored || row.l > N) {
      row.skipped = true;
      ++rep.skipped;
      rep.rows.push_back(row);
      continue;
    }
    double s = 0.0;
    for (const Site& y : c->boundary)
      if (box.contains(y)) s += phi.phi[box.index(y)];
    row.rhs = std::pow(xi0, -static_cast<double>(row.l)) * s;
    row.ok = row.lhs <= row.rhs * (1.0 + 1e-12);
    if (!row.ok) ++rep.violations;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace rwre
