#pragma once

// Two-lane road segment environment for coordinating yield instructions ahead
// of an emergency vehicle (EMV). Lane 0 is the EMV lane, lane 1 the lane that
// pulled-over or braking vehicles end up on.

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace dqjl {

using Rng = std::mt19937_64;

/// Number of per-vehicle features seen by the Q-network: (x, y, v, z, b*, l).
inline constexpr int kFeaturesPerVehicle = 6;

struct RoadConfig {
  double segment_length_m = 150.0;
  double min_gap_m = 0.2;
  double dt_s = 0.2;
  int pad_size = 20;
  double background_speed_mps = 5.0;
  double mean_reaction_s = 2.3;
  double sigma_pullover = 0.8;
  double sigma_brake = 0.5;
  double collision_reward = -2000.0;
  double emv_max_speed_mps = 10.0;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  /// Geometric success probability of the driver reaction, dt / mean reaction.
  double reaction_probability() const { return dt_s / mean_reaction_s; }

  /// Episode step cap, ceil(L / (v_b * dt)).
  int step_cap() const;
};

struct VehicleState {
  double front_pos_m = 0.0;
  int lane = 0;
  double speed_mps = 0.0;
  bool yielding = false;
  double comfort_decel_mps2 = 0.0;
  double length_m = 0.0;
  bool trivial = true;
  // Latent bookkeeping, not part of the network features.
  int reaction_steps_left = 0;
  std::optional<int> yield_issued_step;

  double rear_pos_m() const { return front_pos_m - length_m; }

  /// Real vehicle whose rear has left the segment; frozen from then on.
  bool departed(double segment_length_m) const {
    return !trivial && rear_pos_m() > segment_length_m;
  }

  /// Real vehicle still inside the segment.
  bool active(double segment_length_m) const {
    return !trivial && !departed(segment_length_m);
  }

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

/// Builds a real (non-padding) vehicle row.
VehicleState make_vehicle(double front_pos_m, int lane, double speed_mps,
                          double comfort_decel_mps2, double length_m,
                          bool yielding = false);

/// Fixed-size state: exactly pad_size rows, real rows first.
struct PaddedState {
  std::vector<VehicleState> rows;
  int n_real = 0;
  int step = 0;  // steps elapsed since the initial state

  int pad_size() const { return static_cast<int>(rows.size()); }
  std::span<const VehicleState> real_rows() const {
    return {rows.data(), static_cast<std::size_t>(n_real)};
  }

  friend bool operator==(const PaddedState&, const PaddedState&) = default;
};

/// Instruction for one step: a vehicle index, or kNone for no instruction.
struct ActionIndex {
  static constexpr int kNone = -1;
  int vehicle = kNone;

  constexpr ActionIndex() = default;
  constexpr explicit ActionIndex(int m) : vehicle(m) {}

  constexpr bool is_none() const { return vehicle == kNone; }
  /// Position in the Q-value vector: 0 for no instruction, i + 1 for vehicle i.
  constexpr int output_index() const { return vehicle + 1; }
  static constexpr ActionIndex from_output_index(int index) {
    return ActionIndex(index - 1);
  }

  friend constexpr bool operator==(ActionIndex, ActionIndex) = default;
};

/// Validity per output index (size pad_size + 1; entry 0 is "no instruction").
using ActionMask = std::vector<bool>;

struct StepOutcome {
  PaddedState next_state;
  double reward = 0.0;
  bool done = false;
  bool collided = false;
  bool dqjl_established = false;
};

PaddedState pad_state(std::span<const VehicleState> real_rows, int pad_size);

ActionMask valid_action_mask(const PaddedState& state, const RoadConfig& config);

/// Geometric number of steps (support >= 1) with success probability dt/mean.
int sample_reaction_steps(Rng& rng, double dt_s, double mean_reaction_s);

/// Braking deceleration magnitude for a vehicle in its active braking phase.
double sample_deceleration(Rng& rng, const VehicleState& vehicle,
                           const RoadConfig& config);

/// Minimum sampled deceleration, m/s^2.
inline constexpr double kMinDeceleration = 0.1;

bool check_collision(const PaddedState& state, double min_gap_m,
                     double segment_length_m);

/// Real vehicles on lane 0 whose rear is still inside the segment.
int upper_lane_occupancy(const PaddedState& state, double segment_length_m);

double compute_reward(const PaddedState& state_after, bool collided,
                      const RoadConfig& config);

/// Single-instruction transition. Throws InvalidActionError when the action
/// fails valid_action_mask.
StepOutcome step(const PaddedState& state, ActionIndex action,
                 const RoadConfig& config, Rng& rng);

/// Transition with any number of simultaneous instructions (siren benchmark).
/// Instructions for vehicles that are not valid targets are ignored.
StepOutcome step_multi(const PaddedState& state,
                       std::span<const int> instructed,
                       const RoadConfig& config, Rng& rng);

/// Raw K x 6 feature matrix, one row per padded vehicle: (x, y, v, z, b*, l).
Eigen::MatrixXd feature_matrix(const PaddedState& state);

/// Flat network input of length 6K. Row-major over vehicles; each column is
/// divided by a fixed scale (L for x, emv_max_speed for v, 10 for b* and l)
/// so inputs stay O(1). Padding rows stay exactly zero.
Eigen::VectorXd network_features(const PaddedState& state,
                                 const RoadConfig& config);

}  // namespace dqjl
