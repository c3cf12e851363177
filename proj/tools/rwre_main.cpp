#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rwre/error.hpp"
#include "rwre/experiment.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int report(std::string_view kind, const std::string& message, int code) {
  nlohmann::json j{{"error", std::string(kind)}, {"message", message}, {"exit_code", code}};
  std::cerr << j.dump() << "\n";
  return code;
}

int exit_code(rwre::ErrorKind k) {
  return k == rwre::ErrorKind::usage || k == rwre::ErrorKind::config ? kExitUsage : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Balanced random walks in random environments: experiments and diagnostics", "rwre"};
  app.set_version_flag("--version", std::string(rwre::kVersion));
  std::string command, config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
  std::string names = "validate";
  for (const auto& n : rwre::experiment_names()) names += "|" + n;
  app.add_option("command", command, "Experiment to run, or 'validate'")->required()->type_name(names);
  app.add_option("--config", config_path, "Config JSON file")->required();
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--workers", workers, "Worker threads");
  app.add_option("--out", out, "Output directory");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what(), kExitUsage);
  }

  try {
    rwre::ExperimentConfig cfg = rwre::load_config(config_path);
    rwre::apply_overrides(cfg, rwre::process_overrides());
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    if (out) cfg.out_dir = *out;
    if (command == "validate") {
      const auto problems = rwre::validate(cfg);
      nlohmann::json j{{"valid", problems.empty()}, {"violations", problems}, {"config_hash", rwre::config_hash(cfg)}};
      std::cout << j.dump(2) << "\n";
      return problems.empty() ? 0 : kExitUsage;
    }
    if (!cfg.experiment.empty() && cfg.experiment != command)
      return report("usage", "command '" + command + "' does not match config experiment '" + cfg.experiment + "'",
                    kExitUsage);
    cfg.experiment = command;
    const auto man = rwre::run(cfg);
    nlohmann::json j = man;
    std::cout << j.dump(2) << "\n";
    return 0;
  } catch (const rwre::Error& e) {
    return report(rwre::to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return report("internal", e.what(), kExitRuntime);
  }
}
