#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "dqjl/env.hpp"

namespace dqjl {

/// Distribution of random initial road environments.
///
/// The vehicle count is either given directly or derived from an average
/// spacing as floor(L / spacing). Lengths are Uniform(length_min, length_max),
/// comfortable decelerations Normal(decel_mean, decel_std) truncated to the open
/// interval (decel_min, decel_max) by resampling. Every vehicle starts at the
/// background speed with its rear inside the segment.
struct ScenarioSpec {
  std::optional<int> n_vehicles;
  std::optional<double> spacing_m_per_veh;
  /// When set, each draw picks its count uniformly in [n_vehicles_min, count].
  std::optional<int> n_vehicles_min;
  double length_min_m = 4.0;
  double length_max_m = 5.5;
  double decel_mean_mps2 = 3.5;
  double decel_std_mps2 = 1.0;
  double decel_min_mps2 = 0.5;
  double decel_max_mps2 = 8.0;
  double lane_split = 0.5;  // probability of lane 0
  std::uint64_t seed = 0;

  /// Resolved number of vehicles on a segment of the given length.
  int vehicle_count(double segment_length_m) const;
};

/// Rejection attempts per vehicle before the placement is declared infeasible.
inline constexpr int kPlacementRetries = 1000;

PaddedState generate_scenario(const ScenarioSpec& spec, const RoadConfig& config,
                              Rng& rng);

/// Seeds a fresh generator from spec.seed.
PaddedState generate_scenario(const ScenarioSpec& spec, const RoadConfig& config);

/// Scenario text file: a CSV header `x,lane,v,z,b_star,length` followed by one
/// record per real vehicle, numbers written with 17 significant digits.
void save_scenario(const PaddedState& state, const std::filesystem::path& path);

/// Reads the real vehicles of a scenario file and pads them to pad_size.
PaddedState load_scenario(const std::filesystem::path& path, int pad_size);

/// Real vehicles stored in a scenario file, without padding.
std::vector<VehicleState> load_scenario_rows(const std::filesystem::path& path);

}  // namespace dqjl
