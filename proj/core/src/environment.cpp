#include "rwre/environment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rwre/error.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace {

constexpr std::uint64_t kEnvTag = tag_hash("env");
constexpr std::uint64_t kBlockTag = tag_hash("env-block");

// Flat Dirichlet vector over `dim` coordinates from a hash word.
Vec dirichlet_draw(std::uint64_t h, int dim) {
  Vec y{};
  if (dim == 1) {
    y[0] = 1.0;
    return y;
  }
  double total = 0.0;
  for (int i = 0; i < dim; ++i) {
    y[i] = -std::log(unit_double_open(hash_combine(h, static_cast<std::uint64_t>(i) + 1)));
    total += y[i];
  }
  for (int i = 0; i < dim; ++i) y[i] /= total;
  return y;
}

TransitionKernel dirichlet_kernel(const EnvironmentModel& m, std::uint64_t h) {
  const Vec y = dirichlet_draw(h, m.dim);
  const double spread = 1.0 - m.p_hold - 2.0 * m.dim * m.kappa;
  TransitionKernel k;
  k.dim = m.dim;
  double used = 0.0;
  for (int i = 0; i < m.dim; ++i) {
    k.p_plus[i] = k.p_minus[i] = m.kappa + spread * y[i] / 2.0;
    used += 2.0 * k.p_plus[i];
  }
  k.p_hold = std::max(0.0, 1.0 - used);
  return k;
}

TransitionKernel trap_kernel(const EnvironmentModel& m, std::uint64_t h) {
  const int d = m.dim;
  const int trap_axis = static_cast<int>(hash_combine(h, 101) % static_cast<std::uint64_t>(d));
  int strong_axis = static_cast<int>(hash_combine(h, 102) % static_cast<std::uint64_t>(d - 1));
  if (strong_axis >= trap_axis) ++strong_axis;
  const double per_direction = (1.0 - m.p_hold) / 2.0;
  const double rest = per_direction - m.xi0 - (d - 1) * m.trap_floor;
  const Vec y = dirichlet_draw(hash_combine(h, 103), d - 1);
  TransitionKernel k;
  k.dim = d;
  int slot = 0;
  double used = 0.0;
  for (int i = 0; i < d; ++i) {
    double p;
    if (i == trap_axis) {
      p = m.trap_floor;
    } else {
      p = (i == strong_axis ? m.xi0 : m.trap_floor) + rest * y[slot++];
    }
    k.p_plus[i] = k.p_minus[i] = p;
    used += 2.0 * p;
  }
  k.p_hold = std::max(0.0, 1.0 - used);
  return k;
}

}  // namespace

TransitionKernel TransitionKernel::balanced(int dim, const Vec& p_plus) {
  TransitionKernel k;
  k.dim = dim;
  double used = 0.0;
  for (int i = 0; i < dim; ++i) {
    k.p_plus[i] = k.p_minus[i] = p_plus[i];
    used += 2.0 * p_plus[i];
  }
  k.p_hold = std::max(0.0, 1.0 - used);
  return k;
}

TransitionKernel TransitionKernel::simple(int dim) {
  Vec p{};
  for (int i = 0; i < dim; ++i) p[i] = 1.0 / (2.0 * dim);
  return balanced(dim, p);
}

double TransitionKernel::total() const {
  double s = p_hold;
  for (int i = 0; i < dim; ++i) s += p_plus[i] + p_minus[i];
  return s;
}

bool TransitionKernel::is_balanced(double tol) const {
  for (int i = 0; i < dim; ++i)
    if (std::abs(p_plus[i] - p_minus[i]) > tol) return false;
  return true;
}

double TransitionKernel::min_prob() const {
  double m = 1.0;
  for (int i = 0; i < dim; ++i) m = std::min({m, p_plus[i], p_minus[i]});
  return m;
}

double TransitionKernel::max_axis_prob() const {
  double m = 0.0;
  for (int i = 0; i < dim; ++i) m = std::max(m, p_plus[i]);
  return m;
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::homogeneous: return "homogeneous";
    case ModelKind::iid_dirichlet: return "iid-dirichlet-balanced";
    case ModelKind::trap_mixture: return "iid-trap-mixture";
    case ModelKind::finite_range_block: return "finite-range-block";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "homogeneous") return ModelKind::homogeneous;
  if (s == "iid-dirichlet-balanced") return ModelKind::iid_dirichlet;
  if (s == "iid-trap-mixture") return ModelKind::trap_mixture;
  if (s == "finite-range-block") return ModelKind::finite_range_block;
  fail(ErrorKind::config, "unknown environment kind '" + s + "'");
}

std::vector<std::string> EnvironmentModel::violations() const {
  std::vector<std::string> out;
  if (dim < 1 || dim > kMaxDim) {
    out.push_back("dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    return out;
  }
  if (!(p_hold >= 0.0 && p_hold < 1.0)) out.push_back("p_hold must lie in [0, 1)");
  if (kappa < 0.0) out.push_back("kappa must be nonnegative");
  if (kappa > 1.0 / (2.0 * dim) + 1e-15) {
    out.push_back("κ ≤ 1/(2d) required");
  } else if (2.0 * dim * kappa > 1.0 - p_hold + 1e-15) {
    out.push_back("2 d κ ≤ 1 - p_hold required");
  }
  switch (kind) {
    case ModelKind::homogeneous: {
      bool any = false;
      double s = 0.0;
      for (int i = 0; i < dim; ++i) {
        if (p_plus[i] < 0.0) out.push_back("homogeneous p_plus entries must be nonnegative");
        any = any || p_plus[i] != 0.0;
        s += 2.0 * p_plus[i];
      }
      if (any && s > 1.0 + 1e-12) out.push_back("homogeneous kernel mass 2 Σ p_plus exceeds 1");
      break;
    }
    case ModelKind::iid_dirichlet: break;
    case ModelKind::trap_mixture: {
      if (dim < 2) out.push_back("trap mixture needs d ≥ 2");
      if (!(trap_probability >= 0.0 && trap_probability <= 1.0))
        out.push_back("trap probability must lie in [0, 1]");
      if (!(trap_floor > 0.0)) out.push_back("trap floor must be positive");
      if (xi0 > (1.0 - p_hold) / (2.0 * dim) + 1e-15)
        out.push_back("ξ₀ ≤ (1 - p_hold)/(2d) required so that every site has max_i p_plus ≥ ξ₀");
      if ((1.0 - p_hold) / 2.0 - xi0 - (dim - 1) * trap_floor < -1e-15)
        out.push_back("trap kernel infeasible: ξ₀ + (d-1) ε_trap exceeds (1 - p_hold)/2");
      break;
    }
    case ModelKind::finite_range_block:
      if (block < 1) out.push_back("block size must be ≥ 1");
      break;
  }
  return out;
}

void EnvironmentModel::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid environment model:";
  for (const auto& s : v) msg += " " + s + ";";
  fail(ErrorKind::config, msg);
}

double EnvironmentModel::ellipticity() const {
  switch (kind) {
    case ModelKind::homogeneous: {
      const auto k = sample_site(*this, origin());
      double m = 1.0;
      for (int i = 0; i < dim; ++i) m = std::min(m, k.p_plus[i]);
      return m;
    }
    case ModelKind::iid_dirichlet:
    case ModelKind::finite_range_block: return kappa;
    case ModelKind::trap_mixture:
      return trap_probability > 0.0 ? std::min(kappa, trap_floor) : kappa;
  }
  return 0.0;
}

void to_json(nlohmann::json& j, const EnvironmentModel& m) {
  j = nlohmann::json{{"dim", m.dim},
                     {"kind", to_string(m.kind)},
                     {"kappa", m.kappa},
                     {"p_hold", m.p_hold},
                     {"p_plus", std::vector<double>(m.p_plus.begin(), m.p_plus.begin() + m.dim)},
                     {"trap_probability", m.trap_probability},
                     {"trap_floor", m.trap_floor},
                     {"xi0", m.xi0},
                     {"block", m.block},
                     {"seed", m.seed}};
}

void from_json(const nlohmann::json& j, EnvironmentModel& m) {
  EnvironmentModel d;
  d.dim = j.value("dim", d.dim);
  d.kind = model_kind_from_string(j.value("kind", to_string(d.kind)));
  d.kappa = j.value("kappa", d.kappa);
  d.p_hold = j.value("p_hold", d.p_hold);
  if (j.contains("p_plus")) {
    const auto v = j.at("p_plus").get<std::vector<double>>();
    if (v.size() > static_cast<std::size_t>(kMaxDim)) fail(ErrorKind::config, "p_plus too long");
    for (std::size_t i = 0; i < v.size(); ++i) d.p_plus[i] = v[i];
  }
  d.trap_probability = j.value("trap_probability", d.trap_probability);
  d.trap_floor = j.value("trap_floor", d.trap_floor);
  d.xi0 = j.value("xi0", d.xi0);
  d.block = j.value("block", d.block);
  d.seed = j.value("seed", d.seed);
  m = d;
}

void PerturbationParams::validate(int dim) const {
  if (!(lambda >= 0.0 && lambda < 1.0)) fail(ErrorKind::config, "perturbation λ must lie in [0, 1)");
  double n2 = 0.0;
  for (int i = 0; i < dim; ++i) n2 += ell[i] * ell[i];
  for (int i = dim; i < kMaxDim; ++i)
    if (ell[i] != 0.0) fail(ErrorKind::config, "direction ℓ has components beyond the dimension");
  if (std::abs(std::sqrt(n2) - 1.0) > 1e-12) fail(ErrorKind::config, "direction ℓ must be a unit vector");
}

TransitionKernel sample_site(const EnvironmentModel& m, const Site& site) {
  switch (m.kind) {
    case ModelKind::homogeneous: {
      bool any = false;
      for (int i = 0; i < m.dim; ++i) any = any || m.p_plus[i] != 0.0;
      if (!any) {
        Vec p{};
        for (int i = 0; i < m.dim; ++i) p[i] = (1.0 - m.p_hold) / (2.0 * m.dim);
        return TransitionKernel::balanced(m.dim, p);
      }
      return TransitionKernel::balanced(m.dim, m.p_plus);
    }
    case ModelKind::iid_dirichlet:
      return dirichlet_kernel(m, hash_site(m.seed, kEnvTag, site));
    case ModelKind::trap_mixture: {
      const std::uint64_t h = hash_site(m.seed, kEnvTag, site);
      if (unit_double(hash_combine(h, 100)) < m.trap_probability) return trap_kernel(m, h);
      return dirichlet_kernel(m, h);
    }
    case ModelKind::finite_range_block: {
      Site b{};
      for (int i = 0; i < m.dim; ++i) {
        const std::int64_t q = site[i] / m.block;
        b[i] = (site[i] % m.block != 0 && site[i] < 0) ? q - 1 : q;
      }
      return dirichlet_kernel(m, hash_site(m.seed, kBlockTag, b));
    }
  }
  fail(ErrorKind::config, "unhandled environment kind");
}

TransitionKernel perturb(const TransitionKernel& k, const PerturbationParams& params) {
  TransitionKernel out = k;
  for (int i = 0; i < k.dim; ++i) {
    out.p_plus[i] = (1.0 + params.lambda * params.ell[i]) * k.p_plus[i];
    out.p_minus[i] = (1.0 - params.lambda * params.ell[i]) * k.p_minus[i];
  }
  return out;
}

Vec local_drift(const TransitionKernel& k, const PerturbationParams& params) {
  Vec v{};
  for (int i = 0; i < k.dim; ++i) v[i] = params.lambda * 2.0 * k.p_plus[i] * params.ell[i];
  return v;
}

double epsilon_geo(const TransitionKernel& k) {
  double prod = 1.0;
  for (int i = 0; i < k.dim; ++i) {
    if (!(k.p_plus[i] > 0.0)) fail(ErrorKind::degenerate_site, "epsilon_geo: zero axis probability");
    prod *= k.p_plus[i];
  }
  switch (k.dim) {
    case 1: return prod;
    case 2: return std::sqrt(prod);
    case 3: return std::cbrt(prod);
    default: return std::pow(prod, 1.0 / k.dim);
  }
}

ModelEnvironment::ModelEnvironment(EnvironmentModel model) : model_(std::move(model)) {
  model_.validate();
  homogeneous_ = sample_site(model_, origin());
}

TransitionKernel ModelEnvironment::kernel(const Site& site) const {
  if (model_.kind == ModelKind::homogeneous) return homogeneous_;
  return sample_site(model_, site);
}

TorusEnvironment::TorusEnvironment(Box box, std::vector<TransitionKernel> kernels,
                                   std::optional<EnvironmentModel> provenance)
    : box_(box), kernels_(std::move(kernels)), provenance_(std::move(provenance)) {
  if (kernels_.size() != box_.size())
    fail(ErrorKind::precondition, "torus kernel array does not cover the period box");
}

TorusEnvironment periodize(const EnvironmentModel& model, std::int64_t N) {
  if (N < 1) fail(ErrorKind::precondition, "periodize requires N ≥ 1");
  model.validate();
  const Box box = Box::centred(model.dim, N);
  std::vector<TransitionKernel> ks(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) ks[i] = sample_site(model, box.site(i));
  return TorusEnvironment(box, std::move(ks), model);
}

PerturbedEnvironment::PerturbedEnvironment(std::shared_ptr<const Environment> base,
                                           PerturbationParams params)
    : base_(std::move(base)), params_(params) {
  params_.validate(base_->dim());
}

void PatchEnvironment::set(const Site& s, const TransitionKernel& k) {
  for (auto& [site, kern] : sites_) {
    if (site == s) {
      kern = k;
      return;
    }
  }
  sites_.emplace_back(s, k);
}

TransitionKernel PatchEnvironment::kernel(const Site& site) const {
  for (const auto& [s, k] : sites_)
    if (s == site) return k;
  return fallback_;
}

nlohmann::json snapshot_to_json(const EnvironmentSnapshot& snap) {
  nlohmann::json j;
  j["format"] = "rwre-environment";
  j["version"] = kSnapshotVersion;
  j["model"] = snap.model;
  if (snap.torus) {
    const auto& t = *snap.torus;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& k : t.kernels()) {
      nlohmann::json row = nlohmann::json::array();
      for (int i = 0; i < k.dim; ++i) {
        row.push_back(k.p_plus[i]);
        row.push_back(k.p_minus[i]);
      }
      row.push_back(k.p_hold);
      arr.push_back(std::move(row));
    }
    j["torus"] = {{"dim", t.box().dim()}, {"lo", t.box().lo()}, {"side", t.box().side()}, {"kernels", std::move(arr)}};
  }
  return j;
}

EnvironmentSnapshot snapshot_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "rwre-environment")
    fail(ErrorKind::io, "not an environment snapshot");
  if (j.value("version", 0) != kSnapshotVersion)
    fail(ErrorKind::io, "unsupported snapshot version");
  EnvironmentSnapshot snap;
  snap.model = j.at("model").get<EnvironmentModel>();
  if (j.contains("torus")) {
    const auto& t = j.at("torus");
    const Box box(t.at("dim").get<int>(), t.at("lo").get<std::int64_t>(), t.at("side").get<std::int64_t>());
    std::vector<TransitionKernel> ks;
    ks.reserve(box.size());
    for (const auto& row : t.at("kernels")) {
      TransitionKernel k;
      k.dim = box.dim();
      if (row.size() != static_cast<std::size_t>(2 * k.dim + 1)) fail(ErrorKind::io, "malformed kernel row");
      for (int i = 0; i < k.dim; ++i) {
        k.p_plus[i] = row[static_cast<std::size_t>(2 * i)].get<double>();
        k.p_minus[i] = row[static_cast<std::size_t>(2 * i + 1)].get<double>();
      }
      k.p_hold = row.back().get<double>();
      ks.push_back(k);
    }
    snap.torus.emplace(box, std::move(ks), snap.model);
  }
  return snap;
}

void save_snapshot(const EnvironmentSnapshot& snap, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << snapshot_to_json(snap).dump() << '\n';
}

EnvironmentSnapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot read " + path.string());
  return snapshot_from_json(nlohmann::json::parse(in));
}

std::string to_string(const Site& s, int dim) {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < dim; ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return "config";
    case ErrorKind::degenerate_site: return "degenerate_site";
    case ErrorKind::decomposition: return "decomposition";
    case ErrorKind::budget: return "budget";
    case ErrorKind::input_mismatch: return "input_mismatch";
    case ErrorKind::domain: return "domain";
    case ErrorKind::solver: return "solver";
    case ErrorKind::truncation: return "truncation";
    case ErrorKind::beta_too_large: return "beta_too_large";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::sample_size: return "sample_size";
    case ErrorKind::model_violation: return "model_violation";
    case ErrorKind::io: return "io";
    case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

}  // namespace rwre
