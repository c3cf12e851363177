#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rwre/environment.hpp"

namespace rwre {

inline constexpr std::string_view kVersion = "1.0.0";

/// One experiment run. `params` holds the experiment's numeric parameters;
/// missing keys take the documented defaults.
struct ExperimentConfig {
  std::string experiment;
  EnvironmentModel model;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;
  int workers = 1;
  std::filesystem::path out_dir = "out";
};

const std::vector<std::string>& experiment_names();

/// Parameter names and defaults of an experiment.
nlohmann::json default_params(const std::string& experiment);

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies RWRE_ overrides: RWRE_EXPERIMENT, RWRE_SEED, RWRE_WORKERS, RWRE_OUT,
/// RWRE_MODEL_<KEY> and RWRE_PARAM_<KEY> (keys are lower-cased; values are
/// parsed as JSON when possible and kept as strings otherwise).
void apply_overrides(ExperimentConfig& c, const std::vector<std::pair<std::string, std::string>>& vars);

/// RWRE_* variables of the current process.
std::vector<std::pair<std::string, std::string>> process_overrides();

/// Canonical JSON of everything that determines the outputs (workers and the
/// output directory excluded).
nlohmann::json canonical_config(const ExperimentConfig& c);

/// SHA-256 of the canonical config dump.
std::string config_hash(const ExperimentConfig& c);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Violated constraints, without running anything.
std::vector<std::string> validate(const ExperimentConfig& c);

struct OutputFile {
  std::string name;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string config_hash;
  std::string version{kVersion};
  std::string experiment;
  double wall_time_s = 0.0;
  nlohmann::json task_seeds = nlohmann::json::object();
  std::vector<OutputFile> outputs;
  bool complete = false;
  std::string error;
};

void to_json(nlohmann::json& j, const RunManifest& m);

/// Runs the experiment and writes its outputs and manifest.json into
/// c.out_dir. On failure the manifest is written with complete = false and
/// the error is rethrown.
RunManifest run(const ExperimentConfig& c);

/// RFC-4180 CSV row builder with CRLF line endings.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  CsvWriter& cell(std::string_view s);
  CsvWriter& cell(double v);
  CsvWriter& cell(std::int64_t v);
  CsvWriter& cell(std::uint64_t v);
  CsvWriter& cell(int v) { return cell(static_cast<std::int64_t>(v)); }
  CsvWriter& cell(bool v) { return cell(std::string_view(v ? "true" : "false")); }
  void end_row();

  const std::string& str() const { return buf_; }

 private:
  std::size_t columns_;
  std::size_t in_row_ = 0;
  std::string buf_;
};

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace rwre
