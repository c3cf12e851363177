#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rwre/error.hpp"
#include "rwre/experiment.hpp"
#include "rwre/stationary.hpp"

using namespace rwre;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rwre_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig srw_config(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  c.model = EnvironmentModel::simple(2);
  c.seed = 17;
  return c;
}

ExperimentConfig small(const std::string& experiment) {
  ExperimentConfig c = srw_config(experiment);
  c.model = EnvironmentModel::dirichlet(2, 0.1, 0);
  if (experiment == "simulate") c.params = {{"walkers", 40}, {"steps", 200}, {"averaging", "annealed"}, {"lambda", 0.2}};
  if (experiment == "phi") c.params = {{"N", 3}, {"environments", 3}};
  if (experiment == "diffusivity") c.params = {{"N", 3}, {"environments", 3}, {"walkers", 30}, {"steps", 50}};
  if (experiment == "einstein") c.params = {{"lambdas", {0.2}}, {"ts", {1.0}}, {"walkers", 40}};
  if (experiment == "harnack") c.params = {{"radii", {4, 6}}, {"instances", 3}};
  if (experiment == "maxprinciple") c.params = {{"instances", 4}, {"zero_g_instances", 4}, {"radius", 4}};
  if (experiment == "percolation") {
    c.model = EnvironmentModel::trap(2, 0.05, 0.1, 0.01, 0.2, 0);
    c.params = {{"n_list", {1, 2}}, {"trials", 300}, {"window", 8}, {"phi_N", 3}, {"environments", 3}};
  }
  if (experiment == "regen") {
    c.model = EnvironmentModel::simple(2);
    c.params = {{"lambda", 0.5}, {"walkers", 20}, {"horizon", 20000}, {"min_regenerations", 10}, {"shuffles", 50}};
  }
  if (experiment == "hitting") c.params = {{"lambda", 0.2}, {"walkers", 500}, {"tail_t", {1.0}}};
  return c;
}

std::map<std::string, std::string> data_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename() != "manifest.json") out[e.path().filename().string()] = slurp(e.path());
  return out;
}

}  // namespace

TEST_CASE("CSV quoting and number formatting") {
  CsvWriter w({"a", "b"});
  w.cell(std::string_view("x,y")).cell(std::string_view("say \"hi\""));
  w.end_row();
  w.cell(0.1).cell(std::int64_t{-3});
  w.end_row();
  CHECK(w.str() == "a,b\r\n\"x,y\",\"say \"\"hi\"\"\"\r\n0.1,-3\r\n");
  w.cell(1.0);
  CHECK_THROWS_AS(w.end_row(), Error);
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
  CHECK(std::stod(format_double(0.881499468659871)) == 0.881499468659871);
  CHECK(format_double(1e-300) == "1e-300");
}

TEST_CASE("config hash ignores workers and output directory") {
  ExperimentConfig a = srw_config("phi");
  ExperimentConfig b = a;
  b.workers = 8;
  b.out_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 18;
  CHECK(config_hash(a) != config_hash(b));
  ExperimentConfig c = a;
  c.params = {{"N", 4}};
  CHECK(config_hash(a) == config_hash(c));
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("config JSON round trip and overrides") {
  ExperimentConfig a = small("einstein");
  nlohmann::json j = a;
  const auto b = j.get<ExperimentConfig>();
  CHECK(config_hash(a) == config_hash(b));
  CHECK_THROWS_AS(nlohmann::json({{"experiment", "phi"}, {"bogus", 1}}).get<ExperimentConfig>(), Error);

  ExperimentConfig c = srw_config("phi");
  apply_overrides(c, {{"RWRE_SEED", "99"},
                      {"RWRE_WORKERS", "3"},
                      {"RWRE_PARAM_N", "6"},
                      {"RWRE_MODEL_KAPPA", "0.2"},
                      {"RWRE_MODEL_KIND", "iid-dirichlet-balanced"},
                      {"HOME", "/x"}});
  CHECK(c.seed == 99);
  CHECK(c.workers == 3);
  CHECK(c.params.at("N") == 6);
  CHECK(c.model.kind == ModelKind::iid_dirichlet);
  CHECK(c.model.kappa == 0.2);
  CHECK_THROWS_AS(apply_overrides(c, {{"RWRE_SEED", "many"}}), Error);
  CHECK_THROWS_AS(apply_overrides(c, {{"RWRE_NOPE", "1"}}), Error);
}

TEST_CASE("validate") {
  CHECK(validate(srw_config("phi")).empty());
  for (const auto& name : experiment_names())
    if (name != "percolation") CHECK(validate(small(name)).empty());
  CHECK(validate(small("percolation")).empty());

  ExperimentConfig bad = srw_config("phi");
  bad.model = EnvironmentModel::dirichlet(2, 0.3, 0);
  const auto v = validate(bad);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "κ ≤ 1/(2d) required");

  ExperimentConfig r = srw_config("regen");
  r.params = {{"beta", 0.9}, {"c1_estimate", 0.2}};
  const auto rv = validate(r);
  REQUIRE(rv.size() == 1);
  CHECK(rv[0].find("β < c₁") != std::string::npos);

  r.params = {{"W", 10}};
  REQUIRE(validate(r).size() == 1);
  CHECK(validate(r)[0].find("slab half-width W too small") != std::string::npos);

  ExperimentConfig q = srw_config("percolation");
  q.model = EnvironmentModel::dirichlet(2, 0.1, 0);
  q.params = {{"n_list", {1, 2, 4}}, {"subadditivity_pairs", {{2, 2}, {1, 2}}}};
  REQUIRE(validate(q).size() == 1);
  CHECK(validate(q)[0].find("[1, 2] needs m, n and m + n") != std::string::npos);

  ExperimentConfig u = srw_config("nope");
  CHECK(validate(u).size() == 1);
  ExperimentConfig p = srw_config("phi");
  p.params = {{"radius", 3}};
  p.workers = 0;
  CHECK(validate(p).size() == 2);
  ExperimentConfig h = srw_config("hitting");
  h.params = {{"lambda", 1.5}};
  CHECK(validate(h).size() == 1);
  CHECK_THROWS_AS(run(u), Error);
}

TEST_CASE("phi run on SRW writes a constant density and a consistent manifest") {
  ExperimentConfig c = srw_config("phi");
  c.out_dir = scratch("phi");
  const auto m = run(c);
  CHECK(m.complete);
  CHECK(m.config_hash == config_hash(c));
  std::ifstream in(c.out_dir / "phi_0.bin", std::ios::binary);
  const auto dump = read_phi(in);
  for (double v : dump.phi.phi) CHECK(std::abs(v - 1.0) < 1e-12);
  REQUIRE(m.outputs.size() == 2);
  for (const auto& f : m.outputs) {
    CHECK(sha256_file(c.out_dir / f.name) == f.sha256);
    CHECK(fs::file_size(c.out_dir / f.name) == f.bytes);
  }
  const auto csv = slurp(c.out_dir / "phi.csv");
  CHECK(csv.find(m.config_hash + ",17,") != std::string::npos);
  const auto man = nlohmann::json::parse(slurp(c.out_dir / "manifest.json"));
  CHECK(man.at("complete") == true);
  CHECK(man.at("version") == std::string(kVersion));
  fs::remove_all(c.out_dir);
}

TEST_CASE("hitting run matches the exact value") {
  ExperimentConfig c = srw_config("hitting");
  c.params = {{"lambda", 0.1}, {"walkers", 20000}};
  c.out_dir = scratch("hitting");
  run(c);
  const auto csv = slurp(c.out_dir / "hitting.csv");
  CHECK(csv.find(",0.8814994686598") != std::string::npos);
  CHECK(csv.find(",true\r\n") != std::string::npos);
  fs::remove_all(c.out_dir);
}

TEST_CASE("every experiment is byte-identical across worker counts and reruns") {
  for (const auto& name : experiment_names()) {
    CAPTURE(name);
    ExperimentConfig c = small(name);
    std::map<std::string, std::string> first;
    for (int w : {1, 4, 8, 4}) {
      c.workers = w;
      c.out_dir = scratch(name + std::to_string(w));
      const auto m = run(c);
      CHECK(m.complete);
      const auto files = data_files(c.out_dir);
      CHECK_FALSE(files.empty());
      if (first.empty()) {
        first = files;
      } else {
        CHECK(files == first);
      }
      fs::remove_all(c.out_dir);
    }
    for (const auto& [file, body] : first)
      if (file.ends_with(".csv")) CHECK(body.find(config_hash(c)) != std::string::npos);
  }
}

TEST_CASE("failed runs are marked incomplete") {
  ExperimentConfig c = srw_config("einstein");
  c.params = {{"mode", "sideways"}};
  c.out_dir = scratch("failed");
  CHECK_THROWS_AS(run(c), Error);
  const auto man = nlohmann::json::parse(slurp(c.out_dir / "manifest.json"));
  CHECK(man.at("complete") == false);
  CHECK(man.contains("error"));
  fs::remove_all(c.out_dir);
}
