#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "formnav/env.hpp"
#include "formnav/policy.hpp"
#include "formnav/ppo.hpp"
#include "formnav/world.hpp"

namespace formnav {

// checkpoint file is unreadable, structurally wrong, or does not match the
// policy architecture
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// file could not be read/written or is not parseable at all
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- scenario files -------------------------------------------------------

std::string scenario_to_json(const Scenario& scenario);
// throws std::invalid_argument on semantic violations, IoError on bad JSON
Scenario scenario_from_json(const std::string& text);

void save_scenario(const std::string& path, const Scenario& scenario);
Scenario load_scenario(const std::string& path);

// ---- run configuration + checkpoints --------------------------------------

struct RunConfig {
  std::string method = "afor";  // afor | bl | lf
  CorridorParams corridor;      // generator parameters for the scenario
  std::string scenario_path;    // set instead when loaded from a file
  RewardConfig reward;
  EnvConfig env;
  PpoConfig ppo;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = ".";
};

std::string checkpoint_to_json(const Policy& policy, const RunConfig& config,
                               std::int64_t step_count);

struct LoadedCheckpoint {
  Policy policy;
  RunConfig config;
  std::int64_t step_count = 0;
};
// throws CheckpointError when parameter names/shapes do not line up with a
// freshly built policy
LoadedCheckpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::string& path, const Policy& policy,
                     const RunConfig& config, std::int64_t step_count);
LoadedCheckpoint load_checkpoint(const std::string& path);

// fnv-1a over the serialized parameter section; stable id for "same weights"
std::string checkpoint_param_hash(const Policy& policy);

// ---- metrics + training logs ----------------------------------------------

struct MetricsReport {
  std::string scenario;
  std::string method;
  std::vector<std::uint64_t> seeds;
  double sr_mean = 0.0;
  std::vector<double> sr_per_seed;
  std::map<std::string, double> cfi;  // delta label -> mean value
  double oscillation_mean = 0.0;
};

std::string metrics_to_json(const MetricsReport& report);
void save_metrics(const std::string& path, const MetricsReport& report);

std::string train_log_line(const TrainLogRecord& record);
void save_train_log(const std::string& path, std::span<const TrainLogRecord> log);

// ---- misc ------------------------------------------------------------------

std::string read_text_file(const std::string& path);   // throws IoError
void write_text_file(const std::string& path, const std::string& text);

}  // namespace formnav
