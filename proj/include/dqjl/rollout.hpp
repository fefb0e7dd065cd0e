#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "dqjl/env.hpp"
#include "dqjl/qnet.hpp"
#include "dqjl/scenario.hpp"
#include "dqjl/table.hpp"

namespace dqjl {

/// Per-vehicle step at which the greedy policy instructs it to yield, or -1.
struct YieldingTimeIndicator {
  std::vector<int> yield_step;  // one entry per real vehicle
  std::vector<int> actions;     // raw greedy action trace A*, one per step
  bool established = false;
  bool collided = false;
  int final_step = 0;  // steps executed until establishment, collision or cap

  /// Instruction issued at `step` under this indicator, or kNone.
  ActionIndex action_at(int step) const;
};

/// Outcome of driving a state forward until done or the step cap.
struct RolloutResult {
  int final_step = 0;
  bool established = false;
  bool collided = false;
  double total_return = 0.0;
};

/// Greedy (eps = 0) masked rollout from `initial`; the step noise generator is
/// seeded with `noise_seed`.
YieldingTimeIndicator generate_indicator(const QNetworkd& net, const PaddedState& initial,
                                         const RoadConfig& config, std::uint64_t noise_seed);

/// Open-loop execution of an indicator with the same noise seed.
RolloutResult replay_indicator(const YieldingTimeIndicator& indicator,
                               const PaddedState& initial, const RoadConfig& config,
                               std::uint64_t noise_seed);

/// Table columns: vehicle_index, T_step, T_seconds.
CsvTable indicator_table(const YieldingTimeIndicator& indicator, double dt_s);

struct EmvConfig {
  double length_m = 6.0;
  double trigger_m = 30.0;   // benchmark siren reach
  double max_time_s = 120.0; // simulation horizon; passing time saturates here

  /// Leader-following headway, 2 * min_gap + EMV length.
  double headway_m(const RoadConfig& road) const { return 2.0 * road.min_gap_m + length_m; }
};

struct RlPolicy {
  const QNetworkd* net = nullptr;
};
struct BenchmarkPolicy {
  double trigger_m = 30.0;
};
using Policy = std::variant<RlPolicy, BenchmarkPolicy>;

std::string policy_tag(const Policy& policy);

struct PassingTimeResult {
  std::string policy;
  double passing_time_s = 0.0;  // max_time_s when the EMV never passes
  bool established = false;     // EMV front crossed the segment end
  bool collided = false;
  std::uint64_t seed = 0;
  int n_vehicles = 0;
};

/// Vehicles the siren reaches this step: every valid target whose front lies
/// in [emv_pos, emv_pos + trigger_m]. The benchmark may instruct several.
std::vector<int> benchmark_instructions(const PaddedState& state, double emv_pos_m,
                                        double trigger_m, const RoadConfig& config);

/// EMV on lane 0 entering at x = 0, t = 0. Each step the non-EMVs advance under
/// the policy, then the EMV moves at its maximum speed unless a lane-0 vehicle
/// overlaps [x_emv, x_emv + headway), in which case it takes that vehicle's
/// speed and never closes below the minimum gap.
PassingTimeResult simulate_emv_passing(const PaddedState& initial, const Policy& policy,
                                       const RoadConfig& config, const EmvConfig& emv,
                                       Rng& rng);

struct SweepConfig {
  std::vector<double> spacings_m_per_veh{7.5, 10.0, 12.5, 15.0};
  std::vector<double> speeds_mps{3.0, 5.0, 8.0};
  int runs_per_cell = 5;
  bool include_rl = true;
  bool include_benchmark = true;
  std::uint64_t seed = 1;
  int jobs = 1;
};

struct SweepDetailRow {
  double spacing_m_per_veh = 0.0;
  double speed_mps = 0.0;
  std::string policy;
  int run = 0;
  std::uint64_t seed = 0;
  double passing_time_s = 0.0;
  bool established = false;
  bool collided = false;
};

struct SweepAggregateRow {
  double spacing_m_per_veh = 0.0;
  double speed_mps = 0.0;
  std::string policy;
  int runs = 0;
  double mean_passing_time_s = 0.0;
  int established = 0;
  int collided = 0;
  bool feasible = true;
  std::string note;
};

struct SweepResult {
  std::vector<SweepDetailRow> detail;
  std::vector<SweepAggregateRow> aggregate;

  CsvTable detail_table() const;
  CsvTable aggregate_table() const;
  /// Mean passing time of a cell, or NaN when absent or infeasible.
  double mean(double spacing, double speed, const std::string& policy) const;
};

/// Scenario seed of run `run` in cell (spacing index, speed index). Policies in
/// the same cell and run share it.
std::uint64_t sweep_run_seed(std::uint64_t master, std::size_t spacing_index,
                             std::size_t speed_index, int run);

/// Density x speed grid. `net` may be null when include_rl is false.
SweepResult run_sweep(const SweepConfig& sweep, const RoadConfig& road,
                      const ScenarioSpec& base_spec, const EmvConfig& emv,
                      const QNetworkd* net);

/// Relative passing-time reduction of RL over the benchmark in one cell.
double improvement(const SweepResult& result, double spacing, double speed);

}  // namespace dqjl
