#include "rwre/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "rwre/einstein.hpp"
#include "rwre/elliptic.hpp"
#include "rwre/error.hpp"
#include "rwre/parallel.hpp"
#include "rwre/percolation.hpp"
#include "rwre/regeneration.hpp"
#include "rwre/stationary.hpp"
#include "rwre/walk.hpp"

extern char** environ;

namespace rwre {

namespace {

using json = nlohmann::json;

std::string to_json_string(const EnvironmentModel& m) { return json(m).dump(); }

const std::map<std::string, json>& defaults_table() {
  static const std::map<std::string, json> table = {
      {"simulate",
       {{"walkers", 100}, {"steps", 1000}, {"lambda", 0.0}, {"averaging", "quenched"}, {"dump_paths", 0},
        {"level_stats_l", 0}}},
      {"phi", {{"N", 4}, {"environments", 1}}},
      {"diffusivity", {{"N", 8}, {"environments", 50}, {"walkers", 0}, {"steps", 0}}},
      {"einstein",
       {{"mode", "rescaled"},
        {"lambdas", json::array({0.1})},
        {"ts", json::array({1.0})},
        {"horizon", 1000},
        {"walkers", 10000},
        {"averaging", "annealed"},
        {"reference_N", 0},
        {"reference_environments", 0}}},
      {"harnack",
       {{"radii", json::array({8, 12, 16})}, {"instances", 200}, {"sigma", 0.5}, {"p", 2.0}, {"spike", false}}},
      {"maxprinciple", {{"instances", 1000}, {"zero_g_instances", 1000}, {"radius", 8}}},
      {"percolation",
       {{"eps0", 0.02},
        {"xi0", nullptr},
        {"n_list", json::array({1, 2, 4, 8})},
        {"subadditivity_pairs", json::array()},
        {"trials", 100000},
        {"window", 20},
        {"phi_N", 8},
        {"environments", 20},
        {"kernel_clusters_per_env", 5}}},
      {"regen",
       {{"kind", "beta"},
        {"lambda", 0.1},
        {"beta", nullptr},
        {"beta_factor", 0.5},
        {"c1_sites", 20},
        {"c1_estimate", nullptr},
        {"c1_file", nullptr},
        {"W", 0},
        {"walkers", 1000},
        {"horizon", 1000000},
        {"margin", 0},
        {"shuffles", 10000},
        {"min_regenerations", 500},
        {"coin_kappa", 0.1},
        {"L", 1},
        {"c5", 50.0},
        {"n_min", 8},
        {"n_max", 64}}},
      {"hitting", {{"lambda", 0.1}, {"n", 1}, {"m", 1}, {"walkers", 100000}, {"tail_t", json::array()}}},
  };
  return table;
}

json merged_params(const ExperimentConfig& c) {
  json p = default_params(c.experiment);
  for (const auto& [k, v] : c.params.items()) p[k] = v;
  return p;
}

template <class T>
T param(const json& p, const std::string& key) {
  try {
    return p.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::config, "parameter '" + key + "': " + e.what());
  }
}

std::optional<double> optional_param(const json& p, const std::string& key) {
  if (!p.contains(key) || p.at(key).is_null()) return std::nullopt;
  return param<double>(p, key);
}

Averaging averaging_from(const std::string& s) {
  if (s == "annealed") return Averaging::annealed;
  if (s == "quenched") return Averaging::quenched;
  fail(ErrorKind::config, "averaging must be 'annealed' or 'quenched'");
}

PerturbationParams drift(double lambda) {
  PerturbationParams pp;
  pp.lambda = lambda;
  return pp;
}

std::string site_cell(const Site& s, int dim) {
  std::string out;
  for (int i = 0; i < dim; ++i) {
    if (i) out += ' ';
    out += std::to_string(s[i]);
  }
  return out;
}

std::vector<std::string> with_lineage(std::vector<std::string> cols) {
  cols.insert(cols.begin(), {"config_hash", "seed"});
  return cols;
}

std::optional<double> stored_c1(const json& p) {
  if (auto v = optional_param(p, "c1_estimate")) return v;
  if (p.contains("c1_file") && !p.at("c1_file").is_null()) {
    const auto path = param<std::string>(p, "c1_file");
    std::ifstream in(path);
    if (!in) return std::nullopt;
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("c1")) return std::nullopt;
    return j.at("c1").get<double>();
  }
  return std::nullopt;
}

// Output sink for one run.
class Outputs {
 public:
  Outputs(std::filesystem::path dir, std::string hash, std::uint64_t seed)
      : dir_(std::move(dir)), hash_(std::move(hash)), seed_(seed) {}

  CsvWriter csv(std::vector<std::string> cols) const { return CsvWriter(with_lineage(std::move(cols))); }
  /// Starts a row with the (config hash, seed) lineage cells.
  void begin(CsvWriter& w) const {
    w.cell(std::string_view(hash_));
    w.cell(seed_);
  }
  void write(const std::string& name, const std::string& data) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.close();
    if (!out) fail(ErrorKind::io, "write failed for " + path.string());
    files.push_back({name, sha256_hex(data), data.size()});
  }
  void write_json(const std::string& name, json j) {
    j["config_hash"] = hash_;
    j["seed"] = seed_;
    write(name, j.dump(2) + "\n");
  }
  const std::filesystem::path& dir() const { return dir_; }

  std::vector<OutputFile> files;
  json seeds = json::object();

  void record_seeds(const std::string& stream, const std::vector<std::uint64_t>& s) {
    json e;
    e["rule"] = "task_seed(master, \"" + stream + "\", index)";
    e["count"] = s.size();
    const std::size_t k = std::min<std::size_t>(s.size(), 64);
    e["values"] = std::vector<std::uint64_t>(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k));
    e["truncated"] = s.size() > k;
    seeds[stream] = std::move(e);
  }
  void record_stream(const std::string& stream, std::uint64_t master, std::size_t count) {
    std::vector<std::uint64_t> s;
    for (std::size_t i = 0; i < std::min<std::size_t>(count, 64); ++i) s.push_back(task_seed(master, stream, i));
    record_seeds(stream, s);
    seeds[stream]["count"] = count;
    seeds[stream]["truncated"] = count > s.size();
  }

 private:
  std::filesystem::path dir_;
  std::string hash_;
  std::uint64_t seed_;
};

void run_simulate(const ExperimentConfig& c, const json& p, Outputs& out) {
  const auto walkers = param<std::uint64_t>(p, "walkers");
  const auto steps = param<std::size_t>(p, "steps");
  const double lambda = param<double>(p, "lambda");
  const Averaging avg = averaging_from(param<std::string>(p, "averaging"));
  const auto dumps = param<std::uint64_t>(p, "dump_paths");
  const auto l = param<std::int64_t>(p, "level_stats_l");
  const int d = c.model.dim;
  struct Row {
    Site end{};
    std::int64_t max_level = 0;
    std::string dump, levels;
  };
  const auto rows = parallel_map<Row>(walkers, c.workers, [&](std::size_t w) {
    const EnvironmentModel m = avg == Averaging::annealed ? c.model.with_seed(task_seed(c.seed, "env", w)) : c.model;
    auto base = std::make_shared<ModelEnvironment>(m);
    std::shared_ptr<const Environment> env = base;
    if (lambda > 0.0) env = std::make_shared<PerturbedEnvironment>(base, drift(lambda));
    const std::uint64_t ws = task_seed(c.seed, "walker", w);
    Rng rng(ws);
    const PathRecord path = simulate(*env, origin(), steps, rng);
    Row r;
    r.end = path.end();
    const LevelStats ls(path);
    r.max_level = ls.max_level();
    if (w < dumps) {
      std::ostringstream s;
      write_path(s, path, ws, to_json_string(m));
      r.dump = s.str();
    }
    if (l > 0 && w < std::max<std::uint64_t>(dumps, 1)) {
      std::ostringstream s;
      ls.write_csv(s, l);
      r.levels = s.str();
    }
    return r;
  });
  std::vector<std::string> cols{"walker", "walker_seed", "steps"};
  for (int i = 0; i < d; ++i) cols.push_back("x" + std::to_string(i + 1));
  cols.push_back("max_level");
  auto csv = out.csv(cols);
  for (std::size_t w = 0; w < rows.size(); ++w) {
    out.begin(csv);
    csv.cell(static_cast<std::uint64_t>(w)).cell(task_seed(c.seed, "walker", w)).cell(static_cast<std::uint64_t>(steps));
    for (int i = 0; i < d; ++i) csv.cell(rows[w].end[i]);
    csv.cell(rows[w].max_level);
    csv.end_row();
    if (!rows[w].dump.empty()) out.write("path_" + std::to_string(w) + ".bin", rows[w].dump);
    if (!rows[w].levels.empty()) out.write("levels_" + std::to_string(w) + ".csv", rows[w].levels);
  }
  out.write("simulate.csv", csv.str());
  out.record_stream("walker", c.seed, walkers);
  if (avg == Averaging::annealed) out.record_stream("env", c.seed, walkers);
}

void run_phi(const ExperimentConfig& c, const json& p, Outputs& out) {
  const auto N = param<std::int64_t>(p, "N");
  const auto envs = param<std::size_t>(p, "environments");
  const int d = c.model.dim;
  std::vector<std::uint64_t> seeds(envs);
  for (std::size_t e = 0; e < envs; ++e) seeds[e] = environment_seed(c.seed, "phi", e);
  struct Res {
    StationaryDensity phi;
    double norm = 0.0;
    std::string dump;
  };
  const auto res = parallel_map<Res>(envs, c.workers, [&](std::size_t e) {
    const TorusEnvironment env = periodize(c.model.with_seed(seeds[e]), N);
    Res r;
    r.phi = solve_phi(env);
    if (d >= 2) {
      std::vector<double> eps(env.size());
      for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = epsilon_geo(env.at_index(i));
      r.norm = weighted_norm(r.phi, eps, static_cast<double>(d) / (d - 1));
    }
    std::ostringstream s;
    write_phi(s, r.phi, seeds[e]);
    r.dump = s.str();
    return r;
  });
  auto csv = out.csv({"model", "N", "env_index", "env_seed", "method", "iterations", "residual", "mean", "min", "max",
                      "eps_norm"});
  for (std::size_t e = 0; e < envs; ++e) {
    const auto& ph = res[e].phi;
    out.begin(csv);
    csv.cell(to_string(c.model.kind)).cell(N).cell(static_cast<std::uint64_t>(e)).cell(seeds[e]).cell(ph.method);
    csv.cell(static_cast<std::uint64_t>(ph.iterations)).cell(ph.residual).cell(ph.mean());
    csv.cell(*std::min_element(ph.phi.begin(), ph.phi.end())).cell(*std::max_element(ph.phi.begin(), ph.phi.end()));
    csv.cell(res[e].norm);
    csv.end_row();
    out.write("phi_" + std::to_string(e) + ".bin", res[e].dump);
  }
  out.write("phi.csv", csv.str());
  out.record_seeds("phi", seeds);
}

void run_diffusivity(const ExperimentConfig& c, const json& p, Outputs& out) {
  const auto N = param<std::int64_t>(p, "N");
  const auto envs = param<std::size_t>(p, "environments");
  const auto walkers = param<std::uint64_t>(p, "walkers");
  const auto steps = param<std::size_t>(p, "steps");
  const int d = c.model.dim;
  const DiffusivityMatrix D = diffusivity(c.model, N, envs, c.seed, c.workers);
  out.record_seeds("diffusivity", D.seeds);
  std::vector<Site> ends;
  if (walkers > 0 && steps > 0) {
    ends = parallel_map<Site>(walkers, c.workers, [&](std::size_t w) {
      const ModelEnvironment env(c.model.with_seed(task_seed(c.seed, "env", w)));
      Rng rng(task_seed(c.seed, "walker", w));
      return simulate(env, origin(), steps, rng).end();
    });
    out.record_stream("walker", c.seed, walkers);
    out.record_stream("env", c.seed, walkers);
  }
  auto csv = out.csv({"N", "environments", "i", "j", "formula", "formula_stderr", "walkers", "steps", "empirical",
                      "empirical_stderr"});
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      out.begin(csv);
      csv.cell(N).cell(static_cast<std::uint64_t>(envs)).cell(i + 1).cell(j + 1);
      if (i == j) {
        csv.cell(D.diagonal[static_cast<std::size_t>(i)].mean).cell(D.diagonal[static_cast<std::size_t>(i)].stderr_);
      } else {
        csv.cell(0.0).cell(0.0);
      }
      csv.cell(walkers).cell(static_cast<std::uint64_t>(steps));
      if (!ends.empty()) {
        std::vector<double> v(ends.size());
        for (std::size_t w = 0; w < ends.size(); ++w)
          v[w] = static_cast<double>(ends[w][i]) * static_cast<double>(ends[w][j]) / static_cast<double>(steps);
        const Estimate e = sample_mean(v);
        csv.cell(e.mean).cell(e.stderr_);
      } else {
        csv.cell(std::string_view()).cell(std::string_view());
      }
      csv.end_row();
    }
  }
  out.write("diffusivity.csv", csv.str());
  auto per = out.csv({"env_index", "env_seed", "residual", "axis", "value"});
  for (std::size_t s = 0; s < D.seeds.size(); ++s)
    for (int i = 0; i < d; ++i) {
      out.begin(per);
      per.cell(static_cast<std::uint64_t>(s)).cell(D.seeds[s]).cell(D.residuals[s]).cell(i + 1);
      per.cell(D.per_seed[s][static_cast<std::size_t>(i)]);
      per.end_row();
    }
  out.write("diffusivity_per_env.csv", per.str());
}

void run_einstein(const ExperimentConfig& c, const json& p, Outputs& out) {
  const auto mode = param<std::string>(p, "mode");
  if (mode != "rescaled" && mode != "velocity") fail(ErrorKind::config, "einstein mode must be 'rescaled' or 'velocity'");
  const auto lambdas = param<std::vector<double>>(p, "lambdas");
  const auto ts = param<std::vector<double>>(p, "ts");
  const auto horizon = param<std::size_t>(p, "horizon");
  const auto walkers = param<std::uint64_t>(p, "walkers");
  const Averaging avg = averaging_from(param<std::string>(p, "averaging"));
  const auto refN = param<std::int64_t>(p, "reference_N");
  const auto refE = param<std::size_t>(p, "reference_environments");
  const int d = c.model.dim;

  std::optional<Estimate> d_ell;
  if (c.model.kind == ModelKind::homogeneous) {
    d_ell = Estimate{2.0 * sample_site(c.model, origin()).p_plus[0], 0.0, 0};
  } else if (refN > 0 && refE > 0) {
    const auto D = diffusivity(c.model, refN, refE, task_seed(c.seed, "reference", 0), c.workers);
    d_ell = D.diagonal[0];
    out.record_seeds("reference", D.seeds);
  }

  auto csv = out.csv({"mode", "averaging", "lambda", "t", "steps", "t_effective", "axis", "estimate", "stderr",
                      "walkers", "point_seed", "d_ell", "d_ell_stderr"});
  std::vector<std::uint64_t> point_seeds;
  std::size_t k = 0;
  const std::vector<double> t_axis = mode == "rescaled" ? ts : std::vector<double>{static_cast<double>(horizon)};
  for (double lambda : lambdas) {
    for (double t : t_axis) {
      WalkerSetup s;
      s.model = c.model;
      s.perturbation = drift(lambda);
      s.walkers = walkers;
      s.seed = task_seed(c.seed, "er-point", k++);
      s.workers = c.workers;
      s.averaging = avg;
      point_seeds.push_back(s.seed);
      std::vector<Estimate> est;
      std::size_t steps = 0;
      double t_eff = 0.0;
      if (mode == "rescaled") {
        const ERPoint pt = rescaled_mean(s, t);
        est = pt.estimate;
        steps = pt.steps;
        t_eff = pt.t_effective;
      } else {
        const VelocityEstimate v = velocity(s, horizon);
        for (const auto& e : v.v) est.push_back({e.mean / lambda, e.stderr_ / lambda, e.n});
        steps = horizon;
        t_eff = static_cast<double>(horizon);
      }
      for (int i = 0; i < d; ++i) {
        out.begin(csv);
        csv.cell(mode).cell(to_string(avg)).cell(lambda).cell(mode == "rescaled" ? t : 0.0);
        csv.cell(static_cast<std::uint64_t>(steps)).cell(t_eff).cell(i + 1);
        csv.cell(est[static_cast<std::size_t>(i)].mean).cell(est[static_cast<std::size_t>(i)].stderr_);
        csv.cell(walkers).cell(s.seed);
        if (d_ell && i == 0) {
          csv.cell(d_ell->mean).cell(d_ell->stderr_);
        } else {
          csv.cell(std::string_view()).cell(std::string_view());
        }
        csv.end_row();
      }
    }
  }
  out.write("einstein.csv", csv.str());
  out.record_seeds("er-point", point_seeds);
}

void run_harnack(const ExperimentConfig& c, const json& p, Outputs& out) {
  HarnackConfig hc;
  hc.model = c.model;
  hc.radii = param<std::vector<double>>(p, "radii");
  hc.instances = param<std::size_t>(p, "instances");
  hc.sigma = param<double>(p, "sigma");
  hc.p = param<double>(p, "p");
  hc.spike = param<bool>(p, "spike");
  hc.seed = c.seed;
  hc.workers = c.workers;
  const auto runs = harnack_experiment(hc);
  auto csv = out.csv({"R", "sigma", "kappa", "instance_seed", "max_inner", "min_inner", "ratio", "mvi_ratio"});
  std::vector<std::uint64_t> seeds;
  for (const auto& h : runs) {
    out.begin(csv);
    csv.cell(h.R).cell(hc.sigma).cell(c.model.kappa).cell(h.seed).cell(h.max_inner).cell(h.min_inner).cell(h.ratio);
    csv.cell(h.mvi_ratio);
    csv.end_row();
    seeds.push_back(h.seed);
  }
  out.write("harnack.csv", csv.str());
  auto sum = out.csv({"R", "max_ratio", "max_mvi_ratio"});
  for (const auto& s : summarize_harnack(runs)) {
    out.begin(sum);
    sum.cell(s.R).cell(s.max_ratio).cell(s.max_mvi_ratio);
    sum.end_row();
  }
  out.write("harnack_summary.csv", sum.str());
  out.record_seeds("harnack", seeds);
}

void run_maxprinciple(const ExperimentConfig& c, const json& p, Outputs& out) {
  const auto n_g = param<std::size_t>(p, "instances");
  const auto n_zero = param<std::size_t>(p, "zero_g_instances");
  const auto R = param<std::int64_t>(p, "radius");
  const std::size_t total = n_g + n_zero;
  const auto res = parallel_map<MaxPrincipleInstance>(total, c.workers, [&](std::size_t i) {
    return max_principle_instance(c.model, R, i >= n_g, task_seed(c.seed, "maxprinciple", i));
  });
  auto csv = out.csv({"instance", "instance_seed", "zero_g", "max_interior", "max_boundary", "contact_sites",
                      "contact_sum", "diameter", "rhs", "ratio", "hypothesis_ok", "pure_principle_ok", "bound_ok"});
  std::size_t pure_viol = 0, bound_viol = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const auto& r = res[i].report;
    out.begin(csv);
    csv.cell(static_cast<std::uint64_t>(i)).cell(res[i].seed).cell(res[i].zero_g).cell(r.max_interior);
    csv.cell(r.max_boundary).cell(static_cast<std::uint64_t>(r.contact_sites)).cell(r.contact_sum).cell(r.diameter);
    csv.cell(r.rhs).cell(r.ratio).cell(r.hypothesis_ok).cell(r.pure_principle_ok).cell(r.bound_ok);
    csv.end_row();
    pure_viol += r.pure_principle_ok ? 0 : 1;
    bound_viol += r.bound_ok ? 0 : 1;
  }
  out.write("maxprinciple.csv", csv.str());
  out.write_json("maxprinciple_summary.json", {{"constant", kMaxPrincipleConstant},
                                               {"instances", n_g},
                                               {"zero_g_instances", n_zero},
                                               {"pure_principle_violations", pure_viol},
                                               {"bound_violations", bound_viol}});
  out.record_stream("maxprinciple", c.seed, total);
}

void run_percolation(const ExperimentConfig& c, const json& p, Outputs& out) {
  const double eps0 = param<double>(p, "eps0");
  const double xi0 = optional_param(p, "xi0").value_or(c.model.xi0);
  const auto n_list = param<std::vector<std::int64_t>>(p, "n_list");
  const auto pairs = param<std::vector<std::pair<std::int64_t, std::int64_t>>>(p, "subadditivity_pairs");
  const auto trials = param<std::uint64_t>(p, "trials");
  const auto window = param<std::int64_t>(p, "window");
  const auto N = param<std::int64_t>(p, "phi_N");
  const auto envs = param<std::size_t>(p, "environments");
  const auto per_env = param<std::size_t>(p, "kernel_clusters_per_env");
  const int d = c.model.dim;

  const std::uint64_t qn_master = task_seed(c.seed, "qn-master", 0);
  const QnTable table = estimate_qn(c.model, eps0, n_list, trials, qn_master, c.workers);
  out.record_stream("qn", qn_master, trials);
  auto qn = out.csv({"n", "trials", "hits", "q", "stderr", "lo", "hi"});
  for (const auto& r : table.rows) {
    out.begin(qn);
    qn.cell(r.n).cell(r.trials).cell(r.hits).cell(r.q.mean).cell(r.q.stderr_).cell(r.q.lo()).cell(r.q.hi());
    qn.end_row();
  }
  out.write("qn.csv", qn.str());
  json fit{{"phi", table.phi}, {"phi_defined", table.phi_defined}, {"all_percolate", table.all_percolate}};
  if (table.all_percolate) fit["warning"] = "every trial percolated: p is too large for finite clusters";
  json sub = json::array();
  for (const auto& r : subadditivity_checks(table, d, pairs))
    sub.push_back({{"m", r.m}, {"n", r.n}, {"q_sum", r.q_sum.mean}, {"q_sum_stderr", r.q_sum.stderr_},
                   {"upper", r.upper}, {"lower", r.lower}, {"upper_ok", r.upper_ok}, {"lower_ok", r.lower_ok}});
  fit["subadditivity"] = sub;
  out.write_json("qn_fit.json", fit);

  if (envs == 0) return;
  std::vector<std::uint64_t> seeds(envs);
  for (std::size_t e = 0; e < envs; ++e) seeds[e] = environment_seed(c.seed, "percolation", e);
  struct EnvResult {
    std::string clusters, control, kernels;
    std::size_t violations = 0;
  };
  const auto res = parallel_map<EnvResult>(envs, c.workers, [&](std::size_t e) {
    const EnvironmentModel m = c.model.with_seed(seeds[e]);
    const ModelEnvironment env(m);
    const ClusterMap cm = classify_and_cluster(env, Box::centred(d, window), eps0);
    const StationaryDensity phi = solve_phi(periodize(m, N));
    const PhiControlReport rep = check_phi_control(phi, cm, xi0);
    EnvResult r;
    r.violations = rep.violations;
    CsvWriter cl({"x"});
    std::ostringstream cs, ps, ks;
    for (std::size_t k = 0; k < cm.clusters().size(); ++k) {
      const auto& cc = cm.clusters()[k];
      cs << e << ',' << seeds[e] << ',' << k << ',' << cc.sites.size() << ',' << cc.diameter << ','
         << (cc.censored ? "true" : "false") << "\r\n";
    }
    for (const auto& row : rep.rows)
      ps << e << ',' << seeds[e] << ',' << site_cell(row.x, d) << ',' << row.l << ',' << format_double(row.lhs) << ','
         << format_double(row.rhs) << ',' << (row.skipped ? "true" : "false") << ',' << (row.ok ? "true" : "false")
         << "\r\n";
    std::size_t used = 0;
    for (std::size_t k = 0; k < cm.clusters().size() && used < per_env; ++k) {
      const auto& cc = cm.clusters()[k];
      if (cc.censored) continue;
      const Site x = cc.sites.front();
      const LambdaSet lam = build_lambda(env, cm, x, xi0);
      const auto a = exit_kernel(env, lam);
      double mass = 0.0, bal = 0.0;
      for (int i = 0; i < d; ++i) {
        double b = 0.0;
        for (const auto& j : a) b += j.weight * static_cast<double>(j.to[i] - x[i]);
        bal = std::max(bal, std::abs(b));
      }
      for (const auto& j : a) mass += j.weight;
      double worst = std::numeric_limits<double>::infinity();
      bool ok = true;
      for (const auto& cc2 : check_corner_bound(d, a, lam, cm.l(x), eps0)) {
        worst = std::min(worst, cc2.a / cc2.bound);
        ok = ok && cc2.ok;
      }
      ks << e << ',' << seeds[e] << ',' << k << ',' << site_cell(x, d) << ',' << cm.l(x) << ',' << lam.sites.size()
         << ',' << format_double(mass) << ',' << format_double(bal) << ',' << format_double(worst) << ','
         << (ok ? "true" : "false") << "\r\n";
      ++used;
    }
    r.clusters = cs.str();
    r.control = ps.str();
    r.kernels = ks.str();
    return r;
  });
  // Lineage prefix for the rows assembled above.
  const std::string prefix = CsvWriter({"a", "b"}).str();
  auto assemble = [&](std::vector<std::string> cols, auto member) {
    std::string body = out.csv(std::move(cols)).str();
    for (const auto& r : res) {
      std::istringstream lines(r.*member);
      std::string line;
      while (std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        CsvWriter w({"a", "b"});
        out.begin(w);
        w.end_row();
        std::string lin = w.str().substr(prefix.size());
        lin.resize(lin.size() - 2);
        body += lin + ',' + line + "\r\n";
      }
    }
    return body;
  };
  out.write("clusters.csv", assemble({"env_index", "env_seed", "cluster", "size", "diameter", "censored"},
                                     &EnvResult::clusters));
  out.write("phi_control.csv", assemble({"env_index", "env_seed", "x", "l_x", "lhs", "rhs", "skipped", "ok"},
                                        &EnvResult::control));
  out.write("exit_kernel.csv", assemble({"env_index", "env_seed", "cluster", "x", "l_x", "lambda_size", "mass",
                                         "balance", "corner_min_ratio", "corner_ok"},
                                        &EnvResult::kernels));
  std::size_t viol = 0;
  for (const auto& r : res) viol += r.violations;
  out.write_json("phi_control_summary.json", {{"environments", envs}, {"N", N}, {"xi0", xi0}, {"violations", viol}});
  out.record_seeds("percolation", seeds);
}

double c1_over_environments(const EnvironmentModel& model, double lambda, const SlabOptions& opts, std::size_t sites,
                            std::uint64_t master, int workers, std::vector<std::uint64_t>& seeds) {
  const std::int64_t s = level_spacing(lambda);
  const std::size_t n = model.kind == ModelKind::homogeneous ? 1 : std::max<std::size_t>(sites, 1);
  seeds.resize(n);
  for (std::size_t i = 0; i < n; ++i) seeds[i] = task_seed(master, "c1", i);
  const auto per = parallel_map<double>(n, workers, [&](std::size_t i) {
    auto base = std::make_shared<ModelEnvironment>(model.with_seed(seeds[i]));
    const PerturbedEnvironment env(base, drift(lambda));
    return min_ratio(slab_hitting_distributions(env, origin(), s, opts));
  });
  return *std::min_element(per.begin(), per.end());
}

void run_regen(const ExperimentConfig& c, const json& p, Outputs& out) {
  const auto kind = param<std::string>(p, "kind");
  const double lambda = param<double>(p, "lambda");
  const auto walkers = param<std::uint64_t>(p, "walkers");
  const int d = c.model.dim;
  if (kind == "L") {
    HeatKernelConfig hk;
    hk.setup.model = c.model;
    hk.setup.perturbation = drift(lambda);
    hk.setup.walkers = walkers;
    hk.setup.seed = c.seed;
    hk.setup.workers = c.workers;
    hk.coin_kappa = param<double>(p, "coin_kappa");
    hk.L = param<int>(p, "L");
    hk.c5 = param<double>(p, "c5");
    hk.n_min = param<std::int64_t>(p, "n_min");
    hk.n_max = param<std::int64_t>(p, "n_max");
    if (const auto m = param<std::size_t>(p, "margin"); m > 0) hk.margin = m;
    const HeatKernelReport rep = heat_kernel_experiment(hk);
    auto csv = out.csv({"n", "max_probability", "argmax"});
    for (const auto& r : rep.rows) {
      out.begin(csv);
      csv.cell(r.n).cell(r.max_probability).cell(site_cell(r.argmax, d));
      csv.end_row();
    }
    out.write("heat_kernel.csv", csv.str());
    out.write_json("heat_kernel.json", {{"slope", rep.slope}, {"walkers", rep.walkers}, {"censored", rep.censored}});
    out.record_stream("walker", c.seed, walkers);
    return;
  }
  if (kind != "beta") fail(ErrorKind::config, "regen kind must be 'beta' or 'L'");
  SlabOptions opts;
  opts.W = param<std::int64_t>(p, "W");
  std::vector<std::uint64_t> c1_seeds;
  const double c1 = c1_over_environments(c.model, lambda, opts, param<std::size_t>(p, "c1_sites"),
                                         task_seed(c.seed, "c1-master", 0), c.workers, c1_seeds);
  out.record_seeds("c1", c1_seeds);
  const double beta = optional_param(p, "beta").value_or(param<double>(p, "beta_factor") * c1);
  out.write_json("regen_c1.json", {{"c1", c1}, {"lambda", lambda}, {"sites", c1_seeds.size()}, {"beta", beta}});

  BetaRegenConfig bc;
  bc.beta = beta;
  bc.perturbation = drift(lambda);
  bc.slab = opts;
  bc.horizon = param<std::size_t>(p, "horizon");
  bc.margin = param<std::size_t>(p, "margin");
  bc.translation_invariant = c.model.kind == ModelKind::homogeneous;
  bc.validate(d);
  const auto seqs = parallel_map<RegenerationSequence>(walkers, c.workers, [&](std::size_t w) {
    auto base = std::make_shared<ModelEnvironment>(c.model.with_seed(task_seed(c.seed, "env", w)));
    const PerturbedEnvironment env(base, bc.perturbation);
    Rng rng(task_seed(c.seed, "walker", w));
    return detect_beta_regenerations(env, bc, rng).sequence;
  });
  out.record_stream("walker", c.seed, walkers);
  out.record_stream("env", c.seed, walkers);
  auto csv = out.csv({"walker", "k", "tau", "x1", "tau_tilde", "delta", "censored"});
  for (std::size_t w = 0; w < seqs.size(); ++w) {
    for (std::size_t k = 0; k < seqs[w].records.size(); ++k) {
      const auto& r = seqs[w].records[k];
      out.begin(csv);
      csv.cell(static_cast<std::uint64_t>(w)).cell(static_cast<std::uint64_t>(k + 1)).cell(static_cast<std::uint64_t>(r.tau));
      csv.cell(r.x[0]).cell(static_cast<std::uint64_t>(r.tau_tilde.value_or(0))).cell(static_cast<std::uint64_t>(r.delta));
      csv.cell(seqs[w].censored);
      csv.end_row();
    }
  }
  out.write("regen.csv", csv.str());
  DiagnosticsConfig dc;
  dc.beta = beta;
  dc.lambda1 = lambda1(lambda);
  dc.kappa = c.model.ellipticity();
  dc.c1 = c1;
  dc.shuffles = param<std::size_t>(p, "shuffles");
  dc.seed = task_seed(c.seed, "permutation", 0);
  dc.min_regenerations = param<std::size_t>(p, "min_regenerations");
  json diag;
  try {
    diag = to_json(regen_diagnostics(seqs, dc));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::sample_size) throw;
    diag = {{"error", std::string(to_string(e.kind()))}, {"message", e.what()}};
  }
  out.write_json("regen_diagnostics.json", diag);
}

void run_hitting(const ExperimentConfig& c, const json& p, Outputs& out) {
  const double lambda = param<double>(p, "lambda");
  const double n = param<double>(p, "n");
  const double m = param<double>(p, "m");
  const auto tail_t = param<std::vector<double>>(p, "tail_t");
  WalkerSetup s;
  s.model = c.model;
  s.perturbation = drift(lambda);
  s.walkers = param<std::uint64_t>(p, "walkers");
  s.seed = c.seed;
  s.workers = c.workers;
  const double exact = hitting_formula(lambda, n, m);
  const Estimate mc = hitting_monte_carlo(s, n, m);
  auto csv = out.csv({"lambda_ell1", "spacing", "n", "m", "exact", "monte_carlo", "stderr", "walkers", "within_3sigma"});
  out.begin(csv);
  csv.cell(lambda).cell(level_spacing(lambda)).cell(n).cell(m).cell(exact).cell(mc.mean).cell(mc.stderr_);
  csv.cell(s.walkers).cell(mc.covers(exact));
  csv.end_row();
  out.write("hitting.csv", csv.str());
  out.record_stream("hitting", c.seed, s.walkers);
  if (!tail_t.empty()) {
    const auto rep = hitting_tail_check(s, m, tail_t);
    auto t = out.csv({"m", "kappa", "t", "threshold", "tail", "stderr", "bound", "ok"});
    for (const auto& r : rep.rows) {
      out.begin(t);
      t.cell(m).cell(rep.kappa).cell(r.t).cell(static_cast<std::uint64_t>(r.threshold)).cell(r.tail.mean);
      t.cell(r.tail.stderr_).cell(r.bound).cell(r.ok);
      t.end_row();
    }
    out.write("hitting_tail.csv", t.str());
  }
}

using Runner = void (*)(const ExperimentConfig&, const json&, Outputs&);

Runner runner_for(const std::string& name) {
  static const std::map<std::string, Runner> table = {
      {"simulate", run_simulate}, {"phi", run_phi},         {"diffusivity", run_diffusivity},
      {"einstein", run_einstein}, {"harnack", run_harnack}, {"maxprinciple", run_maxprinciple},
      {"percolation", run_percolation}, {"regen", run_regen}, {"hitting", run_hitting}};
  const auto it = table.find(name);
  if (it == table.end()) fail(ErrorKind::usage, "unknown experiment '" + name + "'");
  return it->second;
}

void check_positive(const json& p, const std::string& key, std::vector<std::string>& out) {
  if (!p.contains(key) || p.at(key).is_null()) return;
  if (!p.at(key).is_number() || p.at(key).get<double>() <= 0.0) out.push_back(key + " must be a positive number");
}

void check_lambda(const json& p, const std::string& key, std::vector<std::string>& out) {
  auto ok = [](const json& v) { return v.is_number() && v.get<double>() > 0.0 && v.get<double>() < 1.0; };
  if (!p.contains(key)) return;
  const json& v = p.at(key);
  if (v.is_array()) {
    for (const auto& x : v)
      if (!ok(x)) out.push_back("every entry of " + key + " must lie in (0, 1)");
  } else if (!ok(v)) {
    out.push_back(key + " must lie in (0, 1)");
  }
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [k, _] : defaults_table()) v.push_back(k);
    return v;
  }();
  return names;
}

json default_params(const std::string& experiment) {
  const auto& t = defaults_table();
  const auto it = t.find(experiment);
  return it == t.end() ? json::object() : it->second;
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"experiment", c.experiment}, {"model", c.model},         {"params", c.params},
           {"seed", c.seed},             {"workers", c.workers},     {"out_dir", c.out_dir.string()}};
}

void from_json(const json& j, ExperimentConfig& c) {
  ExperimentConfig d;
  try {
    d.experiment = j.value("experiment", std::string{});
    if (j.contains("model")) d.model = j.at("model").get<EnvironmentModel>();
    if (j.contains("params")) {
      if (!j.at("params").is_object()) fail(ErrorKind::config, "params must be an object");
      d.params = j.at("params");
    }
    d.seed = j.value("seed", d.seed);
    d.workers = j.value("workers", d.workers);
    d.out_dir = j.value("out_dir", d.out_dir.string());
    for (const auto& [k, _] : j.items())
      if (k != "experiment" && k != "model" && k != "params" && k != "seed" && k != "workers" && k != "out_dir")
        fail(ErrorKind::config, "unknown config key '" + k + "'");
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("malformed config: ") + e.what());
  }
  c = d;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config " + path.string());
  const json j = json::parse(in, nullptr, false, true);
  if (j.is_discarded()) fail(ErrorKind::config, "config " + path.string() + " is not valid JSON");
  return j.get<ExperimentConfig>();
}

void apply_overrides(ExperimentConfig& c, const std::vector<std::pair<std::string, std::string>>& vars) {
  auto value = [](const std::string& s) {
    json v = json::parse(s, nullptr, false);
    return v.is_discarded() ? json(s) : v;
  };
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return s;
  };
  json model = c.model;
  bool model_changed = false;
  for (const auto& [name, raw] : vars) {
    if (name.rfind("RWRE_", 0) != 0) continue;
    const std::string key = name.substr(5);
    try {
      if (key == "EXPERIMENT") {
        c.experiment = raw;
      } else if (key == "SEED") {
        c.seed = std::stoull(raw);
      } else if (key == "WORKERS") {
        c.workers = std::stoi(raw);
      } else if (key == "OUT") {
        c.out_dir = raw;
      } else if (key.rfind("MODEL_", 0) == 0) {
        model[lower(key.substr(6))] = value(raw);
        model_changed = true;
      } else if (key.rfind("PARAM_", 0) == 0) {
        std::string k = key.substr(6);
        // Parameter names are case-sensitive; accept the lower-case form and exact matches.
        const json defs = default_params(c.experiment);
        if (!defs.contains(k)) k = lower(k);
        c.params[k] = value(raw);
      } else {
        fail(ErrorKind::config, "unknown override " + name);
      }
    } catch (const std::logic_error&) {
      fail(ErrorKind::config, "override " + name + " has an invalid value '" + raw + "'");
    }
  }
  if (model_changed) {
    try {
      c.model = model.get<EnvironmentModel>();
    } catch (const json::exception& e) {
      fail(ErrorKind::config, std::string("model override: ") + e.what());
    }
  }
}

std::vector<std::pair<std::string, std::string>> process_overrides() {
  std::vector<std::pair<std::string, std::string>> out;
  for (char** e = environ; e && *e; ++e) {
    const std::string s(*e);
    if (s.rfind("RWRE_", 0) != 0) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) continue;
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  std::sort(out.begin(), out.end());
  return out;
}

json canonical_config(const ExperimentConfig& c) {
  return json{{"experiment", c.experiment}, {"model", c.model}, {"params", merged_params(c)}, {"seed", c.seed},
              {"version", std::string(kVersion)}};
}

std::string config_hash(const ExperimentConfig& c) { return sha256_hex(canonical_config(c).dump()); }

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorKind::io, "SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return sha256_hex(s.str());
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> out;
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end()) {
    out.push_back("unknown experiment '" + c.experiment + "'");
    return out;
  }
  for (auto& v : c.model.violations()) out.push_back(std::move(v));
  if (c.workers < 1) out.push_back("workers must be at least 1");
  const json defs = default_params(c.experiment);
  for (const auto& [k, _] : c.params.items())
    if (!defs.contains(k)) out.push_back("unknown parameter '" + k + "' for experiment '" + c.experiment + "'");
  const json p = merged_params(c);
  for (const char* k : {"walkers", "steps", "N", "environments", "trials", "instances", "horizon", "window", "phi_N",
                        "radius", "sigma", "p", "eps0", "n", "m", "c5", "shuffles"}) {
    if (!defs.contains(k)) continue;
    const json& v = p.at(k);
    if (!v.is_number() || v.get<double>() < 0.0) out.push_back(std::string(k) + " must be a nonnegative number");
  }
  if (c.experiment == "hitting" || c.experiment == "regen") check_lambda(p, "lambda", out);
  if (c.experiment == "einstein") check_lambda(p, "lambdas", out);
  if (c.experiment == "simulate" && p.at("lambda").is_number() &&
      (p.at("lambda").get<double>() < 0.0 || p.at("lambda").get<double>() >= 1.0))
    out.push_back("lambda must lie in [0, 1)");
  if (c.experiment == "harnack" && p.at("sigma").is_number() &&
      !(p.at("sigma").get<double>() > 0.0 && p.at("sigma").get<double>() < 1.0))
    out.push_back("sigma must lie in (0, 1)");
  if (c.experiment == "percolation") {
    check_positive(p, "xi0", out);
    if (c.model.kind != ModelKind::trap_mixture && c.model.kind != ModelKind::iid_dirichlet)
      out.push_back("percolation needs a random environment (iid-trap-mixture or iid-dirichlet-balanced)");
    if (p.at("n_list").is_array() && p.at("subadditivity_pairs").is_array()) {
      std::set<std::int64_t> ns;
      for (const auto& v : p.at("n_list"))
        if (v.is_number_integer()) ns.insert(v.get<std::int64_t>());
      for (const auto& pr : p.at("subadditivity_pairs")) {
        if (!pr.is_array() || pr.size() != 2 || !pr[0].is_number_integer() || !pr[1].is_number_integer()) {
          out.push_back("subadditivity_pairs entries must be [m, n] integer pairs");
          continue;
        }
        const auto m = pr[0].get<std::int64_t>(), n = pr[1].get<std::int64_t>();
        if (!ns.count(m) || !ns.count(n) || !ns.count(m + n))
          out.push_back("subadditivity pair [" + std::to_string(m) + ", " + std::to_string(n) +
                        "] needs m, n and m + n in n_list");
      }
    }
  }
  if (c.experiment == "regen" && p.at("lambda").is_number()) {
    const double lambda = p.at("lambda").get<double>();
    if (lambda > 0.0 && lambda < 1.0) {
      const std::int64_t s = level_spacing(lambda);
      const std::int64_t need = std::max<std::int64_t>(40, 12 * s);
      if (p.at("W").is_number_integer() && p.at("W").get<std::int64_t>() != 0 && p.at("W").get<std::int64_t>() < need)
        out.push_back("slab half-width W too small: need W ≥ " + std::to_string(need) + " at spacing " +
                      std::to_string(s));
      const auto beta = optional_param(p, "beta");
      const auto c1 = stored_c1(p);
      if (beta && !(*beta > 0.0 && *beta < 1.0)) out.push_back("β must lie in (0, 1)");
      if (beta && c1 && *beta >= *c1)
        out.push_back("β < c₁ required for the regeneration coins: β = " + format_double(*beta) +
                      " but the stored c₁ estimate is " + format_double(*c1));
      if (!p.at("c1_file").is_null() && !c1) out.push_back("c1_file does not hold a c₁ estimate");
    }
    const auto kind = p.at("kind");
    if (kind != "beta" && kind != "L") out.push_back("regen kind must be 'beta' or 'L'");
    if (kind == "L" && !(p.at("coin_kappa").is_number() &&
                         p.at("coin_kappa").get<double>() * c.model.dim <= 0.5 && p.at("coin_kappa").get<double>() > 0))
      out.push_back("coin_kappa must lie in (0, 1/(2d)]");
  }
  if (p.contains("averaging") && p.at("averaging") != "annealed" && p.at("averaging") != "quenched")
    out.push_back("averaging must be 'annealed' or 'quenched'");
  return out;
}

void to_json(json& j, const RunManifest& m) {
  json outs = json::array();
  for (const auto& f : m.outputs) outs.push_back({{"file", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  j = json{{"config_hash", m.config_hash}, {"version", m.version},       {"experiment", m.experiment},
           {"wall_time_s", m.wall_time_s}, {"task_seeds", m.task_seeds}, {"outputs", outs},
           {"complete", m.complete}};
  if (!m.error.empty()) j["error"] = m.error;
}

RunManifest run(const ExperimentConfig& c) {
  const auto problems = validate(c);
  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const auto& s : problems) msg += " " + s + ";";
    fail(ErrorKind::usage, msg);
  }
  std::filesystem::create_directories(c.out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest man;
  man.experiment = c.experiment;
  man.config_hash = config_hash(c);
  Outputs out(c.out_dir, man.config_hash, c.seed);
  auto finish = [&] {
    man.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    man.outputs = out.files;
    man.task_seeds = out.seeds;
    json j = man;
    j["config"] = canonical_config(c);
    std::ofstream f(c.out_dir / "manifest.json", std::ios::trunc);
    f << j.dump(2) << "\n";
  };
  try {
    runner_for(c.experiment)(c, merged_params(c), out);
  } catch (const std::exception& e) {
    man.complete = false;
    man.error = e.what();
    finish();
    throw;
  }
  man.complete = true;
  finish();
  return man;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  for (const auto& h : header) cell(std::string_view(h));
  end_row();
}

CsvWriter& CsvWriter::cell(std::string_view s) {
  if (in_row_ > 0) buf_ += ',';
  ++in_row_;
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) {
    buf_ += s;
    return *this;
  }
  buf_ += '"';
  for (char ch : s) {
    if (ch == '"') buf_ += '"';
    buf_ += ch;
  }
  buf_ += '"';
  return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(std::string_view(format_double(v))); }
CsvWriter& CsvWriter::cell(std::int64_t v) { return cell(std::string_view(std::to_string(v))); }
CsvWriter& CsvWriter::cell(std::uint64_t v) { return cell(std::string_view(std::to_string(v))); }

void CsvWriter::end_row() {
  if (in_row_ != columns_) fail(ErrorKind::precondition, "CSV row has the wrong number of cells");
  buf_ += "\r\n";
  in_row_ = 0;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace rwre
