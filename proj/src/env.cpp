#include "dqjl/env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dqjl/errors.hpp"

namespace dqjl {

void RoadConfig::validate() const {
  if (!(segment_length_m > 0.0)) throw ConfigError("segment_length_m must be > 0");
  if (!(dt_s > 0.0)) throw ConfigError("dt_s must be > 0");
  if (pad_size < 1) throw ConfigError("pad_size must be >= 1");
  if (!(min_gap_m >= 0.0)) throw ConfigError("min_gap_m must be >= 0");
  if (!(background_speed_mps > 0.0)) {
    throw ConfigError("background_speed_mps must be > 0");
  }
  if (!(sigma_pullover >= 0.0) || !(sigma_brake >= 0.0)) {
    throw ConfigError("deceleration noise std must be >= 0");
  }
  if (!(emv_max_speed_mps > 0.0)) throw ConfigError("emv_max_speed_mps must be > 0");
  const double p = reaction_probability();
  if (!(p > 0.0 && p <= 1.0)) {
    throw ConfigError("dt_s / mean_reaction_s must lie in (0, 1], got " +
                      std::to_string(p));
  }
}

int RoadConfig::step_cap() const {
  const double ratio = segment_length_m / (background_speed_mps * dt_s);
  // Absorb representation error such as 250.00000000000003.
  return static_cast<int>(std::ceil(ratio - 1e-9));
}

VehicleState make_vehicle(double front_pos_m, int lane, double speed_mps,
                          double comfort_decel_mps2, double length_m,
                          bool yielding) {
  VehicleState v;
  v.front_pos_m = front_pos_m;
  v.lane = lane;
  v.speed_mps = speed_mps;
  v.yielding = yielding;
  v.comfort_decel_mps2 = comfort_decel_mps2;
  v.length_m = length_m;
  v.trivial = false;
  return v;
}

PaddedState pad_state(std::span<const VehicleState> real_rows, int pad_size) {
  if (pad_size < 1) throw ConfigError("pad_size must be >= 1");
  if (static_cast<int>(real_rows.size()) > pad_size) {
    throw TooManyVehiclesError("scenario has " + std::to_string(real_rows.size()) +
                               " vehicles but pad size is " +
                               std::to_string(pad_size));
  }
  PaddedState state;
  state.rows.assign(real_rows.begin(), real_rows.end());
  for (auto& row : state.rows) row.trivial = false;
  state.n_real = static_cast<int>(real_rows.size());
  state.rows.resize(static_cast<std::size_t>(pad_size), VehicleState{});
  return state;
}

ActionMask valid_action_mask(const PaddedState& state, const RoadConfig& config) {
  ActionMask mask(static_cast<std::size_t>(state.pad_size()) + 1, false);
  mask[0] = true;
  for (int i = 0; i < state.n_real; ++i) {
    const auto& v = state.rows[static_cast<std::size_t>(i)];
    mask[static_cast<std::size_t>(i) + 1] =
        !v.yielding && v.rear_pos_m() < config.segment_length_m;
  }
  return mask;
}

int sample_reaction_steps(Rng& rng, double dt_s, double mean_reaction_s) {
  const double p = dt_s / mean_reaction_s;
  if (!(p > 0.0 && p <= 1.0)) {
    throw ConfigError("reaction success probability outside (0, 1]: " +
                      std::to_string(p));
  }
  // std::geometric_distribution counts failures before the first success.
  std::geometric_distribution<int> failures(p);
  return failures(rng) + 1;
}

double sample_deceleration(Rng& rng, const VehicleState& vehicle,
                           const RoadConfig& config) {
  const double sigma = vehicle.lane == 0 ? config.sigma_pullover : config.sigma_brake;
  double b = vehicle.comfort_decel_mps2;
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    b += noise(rng);
  }
  return std::max(b, kMinDeceleration);
}

bool check_collision(const PaddedState& state, double min_gap_m,
                     double segment_length_m) {
  const auto rows = state.real_rows();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& follower = rows[i];
    if (follower.departed(segment_length_m)) continue;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (i == j) continue;
      const auto& leader = rows[j];
      if (leader.departed(segment_length_m) || leader.lane != follower.lane) continue;
      if (follower.front_pos_m > leader.front_pos_m) continue;
      if (follower.front_pos_m + min_gap_m > leader.rear_pos_m()) return true;
    }
  }
  return false;
}

int upper_lane_occupancy(const PaddedState& state, double segment_length_m) {
  int count = 0;
  for (const auto& v : state.real_rows()) {
    if (v.lane == 0 && v.rear_pos_m() <= segment_length_m) ++count;
  }
  return count;
}

double compute_reward(const PaddedState& state_after, bool collided,
                      const RoadConfig& config) {
  if (collided) return config.collision_reward;
  return -static_cast<double>(
      upper_lane_occupancy(state_after, config.segment_length_m));
}

namespace {

bool lower_slot_free(const PaddedState& state, std::size_t index,
                     const RoadConfig& config) {
  const auto& v = state.rows[index];
  const double lo = v.rear_pos_m() - config.min_gap_m;
  const double hi = v.front_pos_m + config.min_gap_m;
  for (std::size_t j = 0; j < static_cast<std::size_t>(state.n_real); ++j) {
    if (j == index) continue;
    const auto& other = state.rows[j];
    if (other.lane != 1 || other.departed(config.segment_length_m)) continue;
    if (other.front_pos_m >= lo && other.rear_pos_m() <= hi) return false;
  }
  return true;
}

void issue_yield(PaddedState& state, std::size_t index, const RoadConfig& config,
                 Rng& rng) {
  auto& v = state.rows[index];
  v.yielding = true;
  v.reaction_steps_left = sample_reaction_steps(rng, config.dt_s, config.mean_reaction_s);
  v.yield_issued_step = state.step;
}

StepOutcome advance(PaddedState state, const RoadConfig& config, Rng& rng) {
  const double length = config.segment_length_m;
  const auto n = static_cast<std::size_t>(state.n_real);

  for (std::size_t i = 0; i < n; ++i) {
    auto& v = state.rows[i];
    if (v.departed(length)) continue;
    const double speed = v.speed_mps;
    if (v.yielding) {
      if (v.reaction_steps_left > 0) {
        --v.reaction_steps_left;
      } else if (speed > 0.0) {
        const double b = sample_deceleration(rng, v, config);
        v.speed_mps = std::max(0.0, speed - b * config.dt_s);
      }
    }
    v.front_pos_m += speed * config.dt_s;
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto& v = state.rows[i];
    if (v.departed(length)) continue;
    if (v.lane == 0 && v.yielding && v.speed_mps == 0.0 &&
        lower_slot_free(state, i, config)) {
      v.lane = 1;
    }
  }
  ++state.step;

  StepOutcome out;
  out.collided = check_collision(state, config.min_gap_m, length);
  out.reward = compute_reward(state, out.collided, config);
  out.dqjl_established = !out.collided && upper_lane_occupancy(state, length) == 0;
  out.done = out.collided || out.dqjl_established;
  out.next_state = std::move(state);
  return out;
}

}  // namespace

StepOutcome step(const PaddedState& state, ActionIndex action,
                 const RoadConfig& config, Rng& rng) {
  PaddedState next = state;
  if (!action.is_none()) {
    const auto mask = valid_action_mask(state, config);
    if (action.vehicle < -1 || action.vehicle >= state.pad_size() ||
        !mask[static_cast<std::size_t>(action.output_index())]) {
      throw InvalidActionError("action " + std::to_string(action.vehicle) +
                               " is not valid in this state");
    }
    issue_yield(next, static_cast<std::size_t>(action.vehicle), config, rng);
  }
  return advance(std::move(next), config, rng);
}

StepOutcome step_multi(const PaddedState& state, std::span<const int> instructed,
                       const RoadConfig& config, Rng& rng) {
  PaddedState next = state;
  std::vector<int> order(instructed.begin(), instructed.end());
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());
  const auto mask = valid_action_mask(state, config);
  for (int m : order) {
    if (m < 0 || m >= state.n_real) continue;
    if (!mask[static_cast<std::size_t>(m) + 1]) continue;
    issue_yield(next, static_cast<std::size_t>(m), config, rng);
  }
  return advance(std::move(next), config, rng);
}

Eigen::MatrixXd feature_matrix(const PaddedState& state) {
  Eigen::MatrixXd features = Eigen::MatrixXd::Zero(state.pad_size(), kFeaturesPerVehicle);
  for (int i = 0; i < state.n_real; ++i) {
    const auto& v = state.rows[static_cast<std::size_t>(i)];
    features.row(i) << v.front_pos_m, v.lane, v.speed_mps, v.yielding ? 1.0 : 0.0,
        v.comfort_decel_mps2, v.length_m;
  }
  return features;
}

Eigen::VectorXd network_features(const PaddedState& state, const RoadConfig& config) {
  Eigen::Matrix<double, 1, kFeaturesPerVehicle> scale;
  scale << config.segment_length_m, 1.0, config.emv_max_speed_mps, 1.0, 10.0, 10.0;
  Eigen::MatrixXd scaled = feature_matrix(state);
  scaled.array().rowwise() /= scale.array();
  // Row-major flattening: vehicle i occupies entries [6i, 6i + 6).
  Eigen::MatrixXd transposed = scaled.transpose();
  return Eigen::Map<const Eigen::VectorXd>(transposed.data(), transposed.size());
}

}  // namespace dqjl
