#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "dqjl/agent.hpp"
#include "dqjl/env.hpp"
#include "dqjl/rollout.hpp"
#include "dqjl/scenario.hpp"

namespace dqjl {

/// Everything a command needs. Serialized as a JSON document with one section
/// per module: "road", "scenario", "train", "emv", "sweep", plus "seed" and
/// "output_dir". Missing keys keep their defaults; unknown keys are rejected.
struct RunConfig {
  RoadConfig road;
  ScenarioSpec scenario;
  TrainConfig train;
  EmvConfig emv;
  SweepConfig sweep;
  std::uint64_t seed = 1;
  std::string output_dir;

  /// Pushes the master seed into train/sweep/scenario seeds.
  void apply_master_seed();
};

RunConfig default_run_config();
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

}  // namespace dqjl
