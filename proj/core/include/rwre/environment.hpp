#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rwre/lattice.hpp"

namespace rwre {

using Vec = std::array<double, kMaxDim>;

/// Nearest-neighbour transition probabilities at one site.
struct TransitionKernel {
  int dim = 0;
  Vec p_plus{};
  Vec p_minus{};
  double p_hold = 0.0;

  /// Balanced kernel with the given per-axis probabilities; the holding
  /// probability is whatever mass is left.
  static TransitionKernel balanced(int dim, const Vec& p_plus);
  /// Simple random walk: 1/(2d) in every direction.
  static TransitionKernel simple(int dim);

  double prob(MoveCode m) const {
    if (m == kHold) return p_hold;
    return move_sign(m) > 0 ? p_plus[move_axis(m)] : p_minus[move_axis(m)];
  }
  double total() const;
  bool is_balanced(double tol = 0.0) const;
  /// Smallest directional probability min_{|e|=1} w(x,e).
  double min_prob() const;
  /// Largest axis probability max_i w(x,e_i).
  double max_axis_prob() const;

  friend bool operator==(const TransitionKernel&, const TransitionKernel&) = default;
};

enum class ModelKind { homogeneous, iid_dirichlet, trap_mixture, finite_range_block };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

/// Seeded description of an infinite random environment. The kernel at a
/// site is a pure function of (model, site).
///
/// Balanced draws use a flat Dirichlet vector y over the d axes:
///   p_plus[i] = p_minus[i] = kappa + (1 - p_hold - 2 d kappa) y_i / 2.
/// This is one admissible law among many; any balanced, kappa-elliptic law
/// would serve.
struct EnvironmentModel {
  int dim = 2;
  ModelKind kind = ModelKind::homogeneous;
  double kappa = 0.0;
  double p_hold = 0.0;
  /// Homogeneous kernel; all zeros means the (possibly lazy) simple walk.
  Vec p_plus{};
  /// Trap mixture: probability p of a trap site, its floor, and the
  /// guaranteed lower bound xi0 on max_i p_plus[i].
  double trap_probability = 0.0;
  double trap_floor = 0.01;
  double xi0 = 0.25;
  /// Finite-range kind: side of the constant blocks.
  int block = 1;
  std::uint64_t seed = 0;

  static EnvironmentModel simple(int dim) {
    EnvironmentModel m;
    m.dim = dim;
    return m;
  }
  static EnvironmentModel dirichlet(int dim, double kappa, std::uint64_t seed) {
    EnvironmentModel m;
    m.dim = dim;
    m.kind = ModelKind::iid_dirichlet;
    m.kappa = kappa;
    m.seed = seed;
    return m;
  }
  static EnvironmentModel trap(int dim, double kappa, double p, double floor, double xi0,
                               std::uint64_t seed) {
    EnvironmentModel m;
    m.dim = dim;
    m.kind = ModelKind::trap_mixture;
    m.kappa = kappa;
    m.trap_probability = p;
    m.trap_floor = floor;
    m.xi0 = xi0;
    m.seed = seed;
    return m;
  }

  EnvironmentModel with_seed(std::uint64_t s) const {
    EnvironmentModel m = *this;
    m.seed = s;
    return m;
  }

  /// Human-readable list of violated parameter constraints (empty if valid).
  std::vector<std::string> violations() const;
  /// Throws ErrorKind::config listing all violations.
  void validate() const;
  /// Lower bound on min_i p_plus[i] guaranteed at every site.
  double ellipticity() const;

  friend bool operator==(const EnvironmentModel&, const EnvironmentModel&) = default;
};

void to_json(nlohmann::json& j, const EnvironmentModel& m);
void from_json(const nlohmann::json& j, EnvironmentModel& m);

/// Perturbation strength and direction of the drifted environment
/// w^lambda(x,e) = (1 + lambda l.e) w(x,e).
struct PerturbationParams {
  double lambda = 0.0;
  Vec ell{1.0, 0.0, 0.0, 0.0};

  void validate(int dim) const;
};

TransitionKernel sample_site(const EnvironmentModel& model, const Site& site);

/// Unbalanced kernel (1 + lambda l.e) k(e); holding probability unchanged.
TransitionKernel perturb(const TransitionKernel& k, const PerturbationParams& params);

/// One-step mean of perturb(k, params): lambda (2 p_plus[i] l_i)_i.
Vec local_drift(const TransitionKernel& k, const PerturbationParams& params);

/// Geometric mean of the axis probabilities, [prod_i w(x,e_i)]^(1/d).
double epsilon_geo(const TransitionKernel& k);

/// Read-only source of site kernels. Implementations are immutable and safe
/// to share between threads.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual int dim() const = 0;
  virtual TransitionKernel kernel(const Site& site) const = 0;
};

/// The infinite environment drawn lazily from a model.
class ModelEnvironment final : public Environment {
 public:
  explicit ModelEnvironment(EnvironmentModel model);
  int dim() const override { return model_.dim; }
  TransitionKernel kernel(const Site& site) const override;
  const EnvironmentModel& model() const { return model_; }

 private:
  EnvironmentModel model_;
  TransitionKernel homogeneous_;
};

/// Periodic environment stored densely over one period box. `periodize`
/// produces the box [-N, N]^d; fixtures may use any side.
class TorusEnvironment final : public Environment {
 public:
  TorusEnvironment(Box box, std::vector<TransitionKernel> kernels,
                   std::optional<EnvironmentModel> provenance = std::nullopt);

  int dim() const override { return box_.dim(); }
  TransitionKernel kernel(const Site& site) const override {
    return kernels_[box_.index(box_.wrap(site))];
  }
  const Box& box() const { return box_; }
  std::size_t size() const { return kernels_.size(); }
  const TransitionKernel& at_index(std::size_t i) const { return kernels_[i]; }
  const std::vector<TransitionKernel>& kernels() const { return kernels_; }
  const std::optional<EnvironmentModel>& provenance() const { return provenance_; }
  /// Half-width N when the box is [-N, N]^d.
  std::int64_t half_width() const { return -box_.lo(); }

 private:
  Box box_;
  std::vector<TransitionKernel> kernels_;
  std::optional<EnvironmentModel> provenance_;
};

TorusEnvironment periodize(const EnvironmentModel& model, std::int64_t N);

/// Drifted view of a balanced base environment.
class PerturbedEnvironment final : public Environment {
 public:
  PerturbedEnvironment(std::shared_ptr<const Environment> base, PerturbationParams params);
  int dim() const override { return base_->dim(); }
  TransitionKernel kernel(const Site& site) const override {
    return perturb(base_->kernel(site), params_);
  }
  const PerturbationParams& params() const { return params_; }
  const Environment& base() const { return *base_; }

 private:
  std::shared_ptr<const Environment> base_;
  PerturbationParams params_;
};

/// Explicit kernels on finitely many sites with a default elsewhere. Used for
/// hand-built fixtures.
class PatchEnvironment final : public Environment {
 public:
  explicit PatchEnvironment(TransitionKernel fallback) : fallback_(fallback) {}
  void set(const Site& s, const TransitionKernel& k);
  int dim() const override { return fallback_.dim; }
  TransitionKernel kernel(const Site& site) const override;

 private:
  TransitionKernel fallback_;
  std::vector<std::pair<Site, TransitionKernel>> sites_;
};

/// Snapshot file: the model descriptor plus an optional dense torus array.
struct EnvironmentSnapshot {
  EnvironmentModel model;
  std::optional<TorusEnvironment> torus;
};

inline constexpr int kSnapshotVersion = 1;

nlohmann::json snapshot_to_json(const EnvironmentSnapshot& snap);
EnvironmentSnapshot snapshot_from_json(const nlohmann::json& j);
void save_snapshot(const EnvironmentSnapshot& snap, const std::filesystem::path& path);
EnvironmentSnapshot load_snapshot(const std::filesystem::path& path);

}  // namespace rwre
