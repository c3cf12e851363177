#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "rwre/environment.hpp"
#include "rwre/lattice.hpp"
#include "rwre/stats.hpp"

namespace rwre {

struct Jump {
  Site to;
  double weight = 0.0;
};

/// Difference operator (L_a u)(x) = sum_y a(x,y) (u(y) - u(x)).
class DifferenceOperator {
 public:
  using RowFn = std::function<std::vector<Jump>(const Site&)>;

  DifferenceOperator(int dim, RowFn rows) : dim_(dim), rows_(std::move(rows)) {}

  /// L_w of a nearest-neighbour environment (holding mass drops out).
  static DifferenceOperator from_environment(std::shared_ptr<const Environment> env);

  int dim() const { return dim_; }
  std::vector<Jump> row(const Site& x) const { return rows_(x); }
  /// b(x) = sum_y a(x,y)(y - x).
  Vec balance(const Site& x) const;
  /// Largest |y - x|_inf with a(x,y) > 0.
  std::int64_t jump_radius(const Site& x) const;

 private:
  int dim_;
  RowFn rows_;
};

/// Sparse site function.
using SiteValues = std::unordered_map<Site, double, SiteHash>;

/// sum_y a(x,y)(u(y) - u(x)); throws ErrorKind::domain if a needed value is missing.
double apply(const DifferenceOperator& L, const SiteValues& u, const Site& x);

/// Finite set E with its closure. The boundary holds every site outside E that
/// is l_inf-adjacent to E or reachable by one jump of the operator.
class Domain {
 public:
  Domain(int dim, std::vector<Site> interior, const DifferenceOperator* op = nullptr);

  /// Ball {z : |z - centre|_2 < r}.
  static Domain ball(int dim, const Site& centre, double r, const DifferenceOperator* op = nullptr);
  /// Cube centre + [-r, r]^d.
  static Domain cube(int dim, const Site& centre, std::int64_t r, const DifferenceOperator* op = nullptr);

  int dim() const { return dim_; }
  const std::vector<Site>& interior() const { return interior_; }
  const std::vector<Site>& boundary() const { return boundary_; }
  /// Interior sites first, then boundary sites.
  const std::vector<Site>& closure() const { return closure_; }
  bool in_interior(const Site& s) const { return slot_of(s).value_or(interior_.size()) < interior_.size(); }
  std::optional<std::size_t> slot_of(const Site& s) const;
  /// l_inf diameter of the closure.
  std::int64_t closure_diameter() const;

 private:
  int dim_;
  std::vector<Site> interior_;
  std::vector<Site> boundary_;
  std::vector<Site> closure_;
  std::unordered_map<Site, std::size_t, SiteHash> slot_;
};

enum class ContactMethod { simplex, fourier_motzkin };

struct ContactReport {
  /// Per interior site (same order as Domain::interior()).
  std::vector<bool> nonempty;
  std::vector<std::optional<Vec>> witness;
  std::size_t count() const;
};

/// Upper contact set: x has I_u(x) nonempty iff some s satisfies
/// s.(z - x) <= u(x) - u(z) for all z in the closure. `u` is indexed like
/// Domain::closure().
ContactReport contact_set(const Domain& E, std::span<const double> u, ContactMethod method = ContactMethod::simplex,
                          double tol = 1e-9);

/// Decision and witness for a single interior site (index into closure()).
std::optional<Vec> contact_witness(const Domain& E, std::span<const double> u, std::size_t x,
                                   ContactMethod method = ContactMethod::simplex, double tol = 1e-9);

struct DirichletProblem {
  const Domain* domain = nullptr;
  const DifferenceOperator* op = nullptr;
  /// Values on Domain::boundary() in order.
  std::vector<double> boundary;
  /// Right-hand side g on Domain::interior() in order: L u = g.
  std::vector<double> rhs;
};

struct DirichletSolution {
  std::vector<double> u;  // indexed like Domain::closure()
  double residual = 0.0;  // sup_E |L u - g|
};

DirichletSolution solve_dirichlet(const DirichletProblem& p, double tol = 1e-9);

/// Analytic constant of the maximum principle for nearest-neighbour balanced
/// operators: max_E u - max_dE u <= C diam(E-bar) (sum_{contact} (g+/eps)^d)^{1/d}
/// holds with C = 1/2.
inline constexpr double kMaxPrincipleConstant = 0.5;

struct MaxPrincipleReport {
  double max_interior = 0.0;
  double max_boundary = 0.0;
  double contact_sum = 0.0;  // (sum_{contact} (g+/eps)^d)^{1/d}
  double diameter = 0.0;
  double rhs = 0.0;          // C diam * contact_sum + max_boundary
  double ratio = 0.0;        // (max_E u - max_dE u) / (diam * contact_sum)
  std::size_t contact_sites = 0;
  bool hypothesis_ok = true;  // L u >= -g on the contact set
  bool pure_principle_ok = true;  // g == 0 on E implies max_E u <= max_dE u
  bool bound_ok = true;
};

/// `g` and `eps` are indexed like Domain::interior(); `u` like closure().
MaxPrincipleReport check_maximum_principle(const DifferenceOperator& L, const Domain& E, std::span<const double> u,
                                           std::span<const double> g, std::span<const double> eps,
                                           double constant = kMaxPrincipleConstant, double tol = 1e-9);

struct MaxPrincipleInstance {
  std::uint64_t seed = 0;
  bool zero_g = false;
  MaxPrincipleReport report;
};

/// One random instance on the cube [-R, R]^d: environment model.with_seed(seed),
/// iid uniform boundary data and, unless zero_g, L u = -g with g iid uniform on
/// a random half of the sites. eps is the geometric mean of the axis weights.
MaxPrincipleInstance max_principle_instance(const EnvironmentModel& model, std::int64_t R, bool zero_g,
                                            std::uint64_t seed, double constant = kMaxPrincipleConstant);

struct HarnackInstance {
  double R = 0.0;
  std::uint64_t seed = 0;
  double max_inner = 0.0;
  double min_inner = 0.0;
  double ratio = 0.0;
  double mvi_ratio = 0.0;  // max_{B_sR} u / ||u+ / eps^{d/p}||_{B_R,p}
};

struct HarnackConfig {
  EnvironmentModel model;
  std::vector<double> radii{8, 12, 16};
  double sigma = 0.5;
  double p = 2.0;  // exponent of the mean-value inequality
  std::size_t instances = 200;
  bool spike = false;  // single-spike boundary data instead of iid uniform
  std::uint64_t seed = 0;
  int workers = 1;
};

struct HarnackSummary {
  double R = 0.0;
  double max_ratio = 0.0;
  double max_mvi_ratio = 0.0;
};

/// Ratio max/min over B_{sigma R} of u >= 0 harmonic in B_R.
double harnack_ratio(const Domain& ball, std::span<const double> u, const Site& centre, double inner_radius);

/// max_{B_{sigma R}} u divided by (|B_R|^{-1} sum_{B_R} (u+ / eps^{d/p})^p)^{1/p}.
double mean_value_ratio(const Domain& ball, std::span<const double> u, std::span<const double> eps,
                        const Site& centre, double inner_radius, double p);

std::vector<HarnackInstance> harnack_experiment(const HarnackConfig& cfg);
std::vector<HarnackSummary> summarize_harnack(const std::vector<HarnackInstance>& runs);

/// Frozen constants file.
struct EllipticFixture {
  int version = 1;
  double max_principle_constant = kMaxPrincipleConstant;
  /// Largest observed (max_E u - max_dE u)/(diam * contact_sum) on SRW, R=8.
  double srw_calibrated_ratio = 0.0;
  double srw_harnack_ratio = 0.0;
  double srw_mvi_ratio = 0.0;
};
void to_json(nlohmann::json& j, const EllipticFixture& f);
void from_json(const nlohmann::json& j, EllipticFixture& f);

/// Calibration run on SRW at R = 8 used to populate EllipticFixture.
EllipticFixture calibrate_on_srw(int dim, std::size_t instances, std::uint64_t seed);

}  // namespace rwre
