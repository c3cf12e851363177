#include "rwre/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "rwre/error.hpp"
#include "rwre/parallel.hpp"
#include "rwre/rng.hpp"
#include "rwre/sparse.hpp"

namespace rwre {

namespace {

using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim + 1, 1>;
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim + 1, kMaxDim + 1>;

// Revised simplex for max c.lambda s.t. A lambda = b, lambda >= 0 where the
// columns of A are (1, z - x) over the closure and b = (1, 0). The optimum is
// the concave envelope of u at x; x is a contact point iff it equals u(x).
std::optional<Vec> simplex_witness(const Domain& E, std::span<const double> u, std::size_t xi, double tol) {
  const int d = E.dim();
  const int m = d + 1;
  const auto& pts = E.closure();
  const Site x = pts[xi];
  const std::size_t n = pts.size();
  const double ux = u[xi];
  double scale = 1.0;
  for (double v : u) scale = std::max(scale, std::abs(v - ux));
  const double eps = tol * scale;

  auto column = [&](std::size_t j) {
    SmallVec a(m);
    a(0) = 1.0;
    for (int i = 0; i < d; ++i) a(i + 1) = static_cast<double>(pts[j][i] - x[i]);
    return a;
  };

  std::vector<std::size_t> basis(static_cast<std::size_t>(m));
  basis[0] = xi;
  for (int i = 0; i < d; ++i) {
    const auto s = E.slot_of(x + unit(i));
    if (!s) fail(ErrorKind::precondition, "contact set: neighbour outside the closure");
    basis[static_cast<std::size_t>(i + 1)] = *s;
  }
  SmallVec b = SmallVec::Zero(m);
  b(0) = 1.0;

  int degenerate_run = 0;
  const std::size_t max_pivots = 50 * n + 1000;
  for (std::size_t pivot = 0; pivot < max_pivots; ++pivot) {
    SmallMat B(m, m);
    SmallVec cB(m);
    for (int k = 0; k < m; ++k) {
      B.col(k) = column(basis[static_cast<std::size_t>(k)]);
      cB(k) = u[basis[static_cast<std::size_t>(k)]] - ux;
    }
    const Eigen::PartialPivLU<SmallMat> lu(B);
    const SmallVec xB = lu.solve(b);
    const SmallVec y = lu.transpose().solve(cB);
    if (cB.dot(xB) > eps) return std::nullopt;

    const bool bland = degenerate_run > 20;
    std::size_t enter = n;
    double best = eps;
    for (std::size_t j = 0; j < n; ++j) {
      const double r = (u[j] - ux) - y.dot(column(j));
      if (r > best) {
        enter = j;
        if (bland) break;
        best = r;
      }
    }
    if (enter == n) {
      if (y(0) > eps) return std::nullopt;
      Vec s{};
      for (int i = 0; i < d; ++i) s[i] = -y(i + 1);
      return s;
    }
    const SmallVec dir = lu.solve(column(enter));
    int leave = -1;
    double ratio = std::numeric_limits<double>::infinity();
    for (int k = 0; k < m; ++k) {
      if (dir(k) <= 1e-12) continue;
      const double r = std::max(0.0, xB(k)) / dir(k);
      if (r < ratio - 1e-15 ||
          (r <= ratio + 1e-15 && leave >= 0 && basis[static_cast<std::size_t>(k)] < basis[static_cast<std::size_t>(leave)])) {
        ratio = r;
        leave = k;
      }
    }
    if (leave < 0) fail(ErrorKind::solver, "contact simplex: unbounded direction");
    degenerate_run = ratio <= 1e-15 ? degenerate_run + 1 : 0;
    basis[static_cast<std::size_t>(leave)] = enter;
  }
  fail(ErrorKind::solver, "contact simplex: pivot budget exhausted");
}

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  void add(double a, double c) {
    // a s <= c
    if (a > 0.0) hi = std::min(hi, c / a);
    else if (a < 0.0) lo = std::max(lo, c / a);
  }
  double pick() const {
    if (std::isfinite(lo) && std::isfinite(hi)) return 0.5 * (lo + hi);
    if (std::isfinite(lo)) return lo;
    if (std::isfinite(hi)) return hi;
    return 0.0;
  }
};

// Fourier-Motzkin elimination of s_2 (d = 2) or direct interval (d = 1).
std::optional<Vec> fourier_motzkin_witness(const Domain& E, std::span<const double> u, std::size_t xi, double tol) {
  const int d = E.dim();
  if (d > 2) fail(ErrorKind::precondition, "Fourier-Motzkin contact test supports d <= 2");
  const auto& pts = E.closure();
  const Site x = pts[xi];
  const double ux = u[xi];
  double scale = 1.0;
  for (double v : u) scale = std::max(scale, std::abs(v - ux));
  const double eps = tol * scale;

  struct Row {
    double a1, a2, c;
  };
  std::vector<Row> rows;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    if (j == xi) continue;
    rows.push_back({static_cast<double>(pts[j][0] - x[0]), d == 2 ? static_cast<double>(pts[j][1] - x[1]) : 0.0,
                    ux - u[j] + eps});
  }
  Vec s{};
  if (d == 1) {
    Interval iv;
    for (const auto& r : rows) iv.add(r.a1, r.c);
    if (iv.lo > iv.hi) return std::nullopt;
    s[0] = iv.pick();
    return s;
  }
  Interval iv1;
  std::vector<const Row*> pos, neg;
  for (const auto& r : rows) {
    if (r.a2 > 0.0) pos.push_back(&r);
    else if (r.a2 < 0.0) neg.push_back(&r);
    else iv1.add(r.a1, r.c);
  }
  for (const Row* p : pos)
    for (const Row* q : neg) {
      // (c_q - a1_q s1)/a2_q <= (c_p - a1_p s1)/a2_p
      iv1.add(p->a1 / p->a2 - q->a1 / q->a2, p->c / p->a2 - q->c / q->a2);
    }
  if (iv1.lo > iv1.hi) return std::nullopt;
  s[0] = iv1.pick();
  Interval iv2;
  for (const auto& r : rows) iv2.add(r.a2, r.c - r.a1 * s[0]);
  if (iv2.lo > iv2.hi + 1e-12 * scale) return std::nullopt;
  s[1] = iv2.lo > iv2.hi ? 0.5 * (iv2.lo + iv2.hi) : iv2.pick();
  return s;
}

double max_over(std::span<const double> v, std::size_t begin, std::size_t end) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = begin; i < end; ++i) m = std::max(m, v[i]);
  return m;
}

}  // namespace

DifferenceOperator DifferenceOperator::from_environment(std::shared_ptr<const Environment> env) {
  const int d = env->dim();
  return DifferenceOperator(d, [env, d](const Site& x) {
    const TransitionKernel k = env->kernel(x);
    std::vector<Jump> out;
    out.reserve(static_cast<std::size_t>(2 * d));
    for (int i = 0; i < d; ++i) {
      if (k.p_plus[i] > 0.0) out.push_back({x + unit(i, 1), k.p_plus[i]});
      if (k.p_minus[i] > 0.0) out.push_back({x + unit(i, -1), k.p_minus[i]});
    }
    return out;
  });
}

Vec DifferenceOperator::balance(const Site& x) const {
  Vec b{};
  for (const auto& j : row(x))
    for (int i = 0; i < dim_; ++i) b[i] += j.weight * static_cast<double>(j.to[i] - x[i]);
  return b;
}

std::int64_t DifferenceOperator::jump_radius(const Site& x) const {
  std::int64_t r = 0;
  for (const auto& j : row(x))
    if (j.weight > 0.0) r = std::max(r, norm_inf(j.to - x));
  return r;
}

double apply(const DifferenceOperator& L, const SiteValues& u, const Site& x) {
  const auto ux = u.find(x);
  if (ux == u.end()) fail(ErrorKind::domain, "apply: u undefined at x");
  double s = 0.0;
  for (const auto& j : L.row(x)) {
    const auto it = u.find(j.to);
    if (it == u.end()) fail(ErrorKind::domain, "apply: u undefined at a neighbour of x");
    s += j.weight * (it->second - ux->second);
  }
  return s;
}

Domain::Domain(int dim, std::vector<Site> interior, const DifferenceOperator* op)
    : dim_(dim), interior_(std::move(interior)) {
  for (std::size_t i = 0; i < interior_.size(); ++i)
    if (!slot_.emplace(interior_[i], i).second) fail(ErrorKind::precondition, "duplicate site in domain");
  std::vector<Site> bd;
  std::unordered_map<Site, bool, SiteHash> seen;
  auto consider = [&](const Site& y) {
    if (slot_.count(y) || seen.count(y)) return;
    seen.emplace(y, true);
    bd.push_back(y);
  };
  const Box nb = Box::centred(dim, 1);
  for (const auto& x : interior_) {
    for (std::size_t k = 0; k < nb.size(); ++k) consider(x + nb.site(k));
    if (op)
      for (const auto& j : op->row(x)) consider(j.to);
  }
  std::sort(bd.begin(), bd.end());
  boundary_ = std::move(bd);
  closure_ = interior_;
  closure_.insert(closure_.end(), boundary_.begin(), boundary_.end());
  for (std::size_t i = 0; i < boundary_.size(); ++i) slot_.emplace(boundary_[i], interior_.size() + i);
}

Domain Domain::ball(int dim, const Site& centre, double r, const DifferenceOperator* op) {
  const auto R = static_cast<std::int64_t>(std::ceil(r));
  const Box box = Box::centred(dim, R);
  std::vector<Site> sites;
  for (std::size_t i = 0; i < box.size(); ++i) {
    const Site s = box.site(i);
    if (static_cast<double>(norm2_sq(s)) < r * r) sites.push_back(centre + s);
  }
  return Domain(dim, std::move(sites), op);
}

Domain Domain::cube(int dim, const Site& centre, std::int64_t r, const DifferenceOperator* op) {
  const Box box = Box::centred(dim, r);
  std::vector<Site> sites;
  sites.reserve(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) sites.push_back(centre + box.site(i));
  return Domain(dim, std::move(sites), op);
}

std::optional<std::size_t> Domain::slot_of(const Site& s) const {
  const auto it = slot_.find(s);
  if (it == slot_.end()) return std::nullopt;
  return it->second;
}

std::int64_t Domain::closure_diameter() const {
  std::int64_t diam = 0;
  for (int i = 0; i < dim_; ++i) {
    std::int64_t lo = std::numeric_limits<std::int64_t>::max(), hi = std::numeric_limits<std::int64_t>::min();
    for (const auto& s : closure_) {
      lo = std::min(lo, s[i]);
      hi = std::max(hi, s[i]);
    }
    diam = std::max(diam, hi - lo);
  }
  return diam;
}

std::size_t ContactReport::count() const {
  return static_cast<std::size_t>(std::count(nonempty.begin(), nonempty.end(), true));
}

std::optional<Vec> contact_witness(const Domain& E, std::span<const double> u, std::size_t x, ContactMethod method,
                                   double tol) {
  if (u.size() != E.closure().size()) fail(ErrorKind::input_mismatch, "u must be defined on the closure");
  if (x >= E.interior().size()) fail(ErrorKind::domain, "contact set is defined on interior sites");
  return method == ContactMethod::simplex ? simplex_witness(E, u, x, tol) : fourier_motzkin_witness(E, u, x, tol);
}

ContactReport contact_set(const Domain& E, std::span<const double> u, ContactMethod method, double tol) {
  ContactReport r;
  const std::size_t n = E.interior().size();
  r.nonempty.resize(n);
  r.witness.resize(n);
  for (std::size_t x = 0; x < n; ++x) {
    r.witness[x] = contact_witness(E, u, x, method, tol);
    r.nonempty[x] = r.witness[x].has_value();
  }
  return r;
}

DirichletSolution solve_dirichlet(const DirichletProblem& p, double tol) {
  if (!p.domain || !p.op) fail(ErrorKind::precondition, "Dirichlet problem needs a domain and an operator");
  const Domain& E = *p.domain;
  const std::size_t n = E.interior().size();
  if (p.boundary.size() != E.boundary().size() || p.rhs.size() != n)
    fail(ErrorKind::input_mismatch, "Dirichlet data sizes do not match the domain");
  std::vector<Triplet> t;
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
  std::vector<std::vector<Jump>> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i] = p.op->row(E.interior()[i]);
    double diag = 0.0;
    double b = p.rhs[i];
    for (const auto& j : rows[i]) {
      diag += j.weight;
      const auto slot = E.slot_of(j.to);
      if (!slot) fail(ErrorKind::precondition, "operator jumps outside the closure");
      if (*slot < n) t.emplace_back(static_cast<std::ptrdiff_t>(i), static_cast<std::ptrdiff_t>(*slot), j.weight);
      else b -= j.weight * p.boundary[*slot - n];
    }
    if (!(diag > 0.0)) fail(ErrorKind::solver, "operator has an empty row inside the domain");
    t.emplace_back(static_cast<std::ptrdiff_t>(i), static_cast<std::ptrdiff_t>(i), -diag);
    rhs(static_cast<Eigen::Index>(i)) = b;
  }
  const Eigen::MatrixXd sol = sparse_solve(n, t, rhs);
  DirichletSolution out;
  out.u.resize(E.closure().size());
  for (std::size_t i = 0; i < n; ++i) out.u[i] = sol(static_cast<Eigen::Index>(i), 0);
  for (std::size_t i = 0; i < E.boundary().size(); ++i) out.u[n + i] = p.boundary[i];
  for (std::size_t i = 0; i < n; ++i) {
    double lu = 0.0;
    for (const auto& j : rows[i]) lu += j.weight * (out.u[*E.slot_of(j.to)] - out.u[i]);
    out.residual = std::max(out.residual, std::abs(lu - p.rhs[i]));
  }
  if (!(out.residual < tol) || !std::isfinite(out.residual))
    fail(ErrorKind::solver, "Dirichlet solve residual " + std::to_string(out.residual));
  return out;
}

MaxPrincipleReport check_maximum_principle(const DifferenceOperator& L, const Domain& E, std::span<const double> u,
                                           std::span<const double> g, std::span<const double> eps, double constant,
                                           double tol) {
  const std::size_t n = E.interior().size();
  if (u.size() != E.closure().size() || g.size() != n || eps.size() != n)
    fail(ErrorKind::input_mismatch, "maximum principle inputs do not match the domain");
  MaxPrincipleReport r;
  r.max_interior = max_over(u, 0, n);
  r.max_boundary = max_over(u, n, u.size());
  r.diameter = static_cast<double>(E.closure_diameter());
  const ContactReport contact = contact_set(E, u, ContactMethod::simplex, tol);
  const int d = E.dim();
  double sum = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    if (!contact.nonempty[x]) continue;
    ++r.contact_sites;
    double lu = 0.0;
    for (const auto& j : L.row(E.interior()[x])) lu += j.weight * (u[*E.slot_of(j.to)] - u[x]);
    if (lu < -g[x] - tol) r.hypothesis_ok = false;
    if (!(eps[x] > 0.0)) fail(ErrorKind::degenerate_site, "maximum principle needs eps > 0");
    sum += std::pow(std::max(0.0, g[x]) / eps[x], d);
  }
  r.contact_sum = std::pow(sum, 1.0 / d);
  r.rhs = constant * r.diameter * r.contact_sum + r.max_boundary;
  const double excess = r.max_interior - r.max_boundary;
  const double denom = r.diameter * r.contact_sum;
  r.ratio = denom > 0.0 ? excess / denom : (excess > tol ? std::numeric_limits<double>::infinity() : 0.0);
  r.bound_ok = r.max_interior <= r.rhs + tol;
  const bool g_zero = std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; });
  r.pure_principle_ok = !g_zero || r.max_interior <= r.max_boundary + tol;
  return r;
}

MaxPrincipleInstance max_principle_instance(const EnvironmentModel& model, std::int64_t R, bool zero_g,
                                            std::uint64_t seed, double constant) {
  auto env = std::make_shared<ModelEnvironment>(model.with_seed(seed));
  const DifferenceOperator L = DifferenceOperator::from_environment(env);
  const Domain box = Domain::cube(model.dim, origin(), R);
  Rng rng(hash_combine(seed, 2));
  DirichletProblem p{&box, &L, std::vector<double>(box.boundary().size()), std::vector<double>(box.interior().size(), 0.0)};
  std::vector<double> g(box.interior().size(), 0.0);
  if (!zero_g)
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = rng.bernoulli(0.5) ? rng.uniform() : 0.0;
      p.rhs[i] = -g[i];
    }
  for (double& v : p.boundary) v = rng.uniform();
  const DirichletSolution sol = solve_dirichlet(p);
  std::vector<double> eps(g.size());
  for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = epsilon_geo(env->kernel(box.interior()[i]));
  return {seed, zero_g, check_maximum_principle(L, box, sol.u, g, eps, constant)};
}

double harnack_ratio(const Domain& ball, std::span<const double> u, const Site& centre, double inner_radius) {
  double mx = -std::numeric_limits<double>::infinity(), mn = std::numeric_limits<double>::infinity();
  const auto& in = ball.interior();
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (static_cast<double>(norm2_sq(in[i] - centre)) >= inner_radius * inner_radius) continue;
    mx = std::max(mx, u[i]);
    mn = std::min(mn, u[i]);
  }
  if (!(mn > 0.0)) fail(ErrorKind::solver, "harmonic function vanishes inside the inner ball");
  return mx / mn;
}

double mean_value_ratio(const Domain& ball, std::span<const double> u, std::span<const double> eps, const Site& centre,
                        double inner_radius, double p) {
  const auto& in = ball.interior();
  const int d = ball.dim();
  double mx = -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (static_cast<double>(norm2_sq(in[i] - centre)) < inner_radius * inner_radius) mx = std::max(mx, u[i]);
    s += std::pow(std::max(0.0, u[i]) / std::pow(eps[i], d / p), p);
  }
  const double norm = std::pow(s / static_cast<double>(in.size()), 1.0 / p);
  if (mx <= 0.0) return 0.0;
  return mx / norm;
}

std::vector<HarnackInstance> harnack_experiment(const HarnackConfig& cfg) {
  cfg.model.validate();
  const std::size_t total = cfg.radii.size() * cfg.instances;
  std::vector<HarnackInstance> out(total);
  parallel_for(total, cfg.workers, [&](std::size_t task) {
    const std::size_t r_idx = task / cfg.instances;
    const double R = cfg.radii[r_idx];
    const std::uint64_t seed = task_seed(cfg.seed, "harnack", task);
    auto env = std::make_shared<ModelEnvironment>(cfg.model.with_seed(seed));
    const DifferenceOperator L = DifferenceOperator::from_environment(env);
    const Domain ball = Domain::ball(cfg.model.dim, origin(), R);
    Rng rng(hash_combine(seed, 1));
    DirichletProblem p{&ball, &L, std::vector<double>(ball.boundary().size()), std::vector<double>(ball.interior().size(), 0.0)};
    if (cfg.spike) {
      // Only boundary sites the walk can jump to carry harmonic measure.
      std::vector<std::size_t> reachable;
      for (const auto& x : ball.interior())
        for (const auto& j : L.row(x))
          if (j.weight > 0.0 && !ball.in_interior(j.to)) reachable.push_back(*ball.slot_of(j.to) - ball.interior().size());
      std::sort(reachable.begin(), reachable.end());
      reachable.erase(std::unique(reachable.begin(), reachable.end()), reachable.end());
      p.boundary[reachable[static_cast<std::size_t>(rng.below(reachable.size()))]] = 1.0;
    } else {
      for (double& v : p.boundary) v = rng.uniform_open();
    }
    const DirichletSolution sol = solve_dirichlet(p);
    std::vector<double> eps(ball.interior().size());
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = epsilon_geo(env->kernel(ball.interior()[i]));
    HarnackInstance h;
    h.R = R;
    h.seed = seed;
    h.ratio = harnack_ratio(ball, sol.u, origin(), cfg.sigma * R);
    h.mvi_ratio = mean_value_ratio(ball, sol.u, eps, origin(), cfg.sigma * R, cfg.p);
    double mx = -std::numeric_limits<double>::infinity(), mn = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ball.interior().size(); ++i) {
      if (static_cast<double>(norm2_sq(ball.interior()[i])) >= cfg.sigma * R * cfg.sigma * R) continue;
      mx = std::max(mx, sol.u[i]);
      mn = std::min(mn, sol.u[i]);
    }
    h.max_inner = mx;
    h.min_inner = mn;
    out[task] = h;
  });
  return out;
}

std::vector<HarnackSummary> summarize_harnack(const std::vector<HarnackInstance>& runs) {
  std::vector<HarnackSummary> out;
  for (const auto& h : runs) {
    auto it = std::find_if(out.begin(), out.end(), [&](const HarnackSummary& s) { return s.R == h.R; });
    if (it == out.end()) {
      out.push_back({h.R, h.ratio, h.mvi_ratio});
    } else {
      it->max_ratio = std::max(it->max_ratio, h.ratio);
      it->max_mvi_ratio = std::max(it->max_mvi_ratio, h.mvi_ratio);
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const EllipticFixture& f) {
  j = nlohmann::json{{"format", "rwre-elliptic-constants"},
                     {"version", f.version},
                     {"max_principle_constant", f.max_principle_constant},
                     {"srw_calibrated_ratio", f.srw_calibrated_ratio},
                     {"srw_harnack_ratio", f.srw_harnack_ratio},
                     {"srw_mvi_ratio", f.srw_mvi_ratio}};
}

void from_json(const nlohmann::json& j, EllipticFixture& f) {
  if (j.value("format", std::string{}) != "rwre-elliptic-constants") fail(ErrorKind::io, "not an elliptic constants file");
  f.version = j.at("version").get<int>();
  f.max_principle_constant = j.at("max_principle_constant").get<double>();
  f.srw_calibrated_ratio = j.at("srw_calibrated_ratio").get<double>();
  f.srw_harnack_ratio = j.at("srw_harnack_ratio").get<double>();
  f.srw_mvi_ratio = j.at("srw_mvi_ratio").get<double>();
}

EllipticFixture calibrate_on_srw(int dim, std::size_t instances, std::uint64_t seed) {
  EllipticFixture f;
  auto env = std::make_shared<ModelEnvironment>(EnvironmentModel::simple(dim));
  const DifferenceOperator L = DifferenceOperator::from_environment(env);
  const Domain box = Domain::cube(dim, origin(), 8);
  const double eps = epsilon_geo(TransitionKernel::simple(dim));
  for (std::size_t k = 0; k < instances; ++k) {
    Rng rng(task_seed(seed, "calibrate", k));
    DirichletProblem p{&box, &L, std::vector<double>(box.boundary().size(), 0.0), std::vector<double>(box.interior().size())};
    std::vector<double> g(box.interior().size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = rng.bernoulli(0.5) ? rng.uniform() : 0.0;
      p.rhs[i] = -g[i];
    }
    for (double& v : p.boundary) v = rng.uniform();
    const DirichletSolution sol = solve_dirichlet(p);
    const std::vector<double> e(g.size(), eps);
    const auto rep = check_maximum_principle(L, box, sol.u, g, e);
    f.srw_calibrated_ratio = std::max(f.srw_calibrated_ratio, rep.ratio);
  }
  HarnackConfig hc;
  hc.model = EnvironmentModel::simple(dim);
  hc.radii = {8};
  hc.instances = instances;
  hc.seed = seed;
  hc.p = dim;
  const auto s = summarize_harnack(harnack_experiment(hc));
  f.srw_harnack_ratio = s.front().max_ratio;
  f.srw_mvi_ratio = s.front().max_mvi_ratio;
  return f;
}

}  // namespace rwre
