#include "dqjl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dqjl/errors.hpp"
#include "dqjl/table.hpp"

namespace dqjl {

int ScenarioSpec::vehicle_count(double segment_length_m) const {
  if (n_vehicles) {
    if (*n_vehicles < 0) throw ConfigError("n_vehicles must be >= 0");
    return *n_vehicles;
  }
  if (spacing_m_per_veh) {
    if (!(*spacing_m_per_veh > 0.0)) throw ConfigError("spacing must be > 0");
    return static_cast<int>(std::floor(segment_length_m / *spacing_m_per_veh + 1e-9));
  }
  throw ConfigError("scenario needs n_vehicles or spacing_m_per_veh");
}

namespace {

bool gap_ok(const VehicleState& a, const VehicleState& b, double min_gap) {
  if (a.lane != b.lane) return true;
  const auto& follower = a.front_pos_m <= b.front_pos_m ? a : b;
  const auto& leader = a.front_pos_m <= b.front_pos_m ? b : a;
  return follower.front_pos_m + min_gap < leader.rear_pos_m();
}

}  // namespace

PaddedState generate_scenario(const ScenarioSpec& spec, const RoadConfig& config,
                              Rng& rng) {
  config.validate();
  const double road = config.segment_length_m;
  int n = spec.vehicle_count(road);
  if (spec.n_vehicles_min) {
    if (*spec.n_vehicles_min < 0 || *spec.n_vehicles_min > n) {
      throw ConfigError("n_vehicles_min must lie in [0, " + std::to_string(n) + "]");
    }
    n = std::uniform_int_distribution<int>(*spec.n_vehicles_min, n)(rng);
  }
  if (n > config.pad_size) {
    throw TooManyVehiclesError("scenario requests " + std::to_string(n) +
                               " vehicles but pad size is " +
                               std::to_string(config.pad_size));
  }
  if (!(spec.length_min_m > 0.0) || spec.length_max_m < spec.length_min_m ||
      spec.length_max_m >= road) {
    throw ConfigError("vehicle length range must satisfy 0 < min <= max < L");
  }
  if (!(spec.decel_min_mps2 < spec.decel_max_mps2)) {
    throw ConfigError("deceleration truncation bounds are empty");
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> length_dist(spec.length_min_m, spec.length_max_m);
  std::normal_distribution<double> decel_dist(spec.decel_mean_mps2, spec.decel_std_mps2);

  std::vector<VehicleState> placed;
  placed.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const int lane = unit(rng) < spec.lane_split ? 0 : 1;
    const double length = length_dist(rng);
    double decel = decel_dist(rng);
    for (int tries = 0; !(decel > spec.decel_min_mps2 && decel < spec.decel_max_mps2);
         ++tries) {
      if (tries >= kPlacementRetries) {
        throw ConfigError("deceleration truncation rejects every draw");
      }
      decel = decel_dist(rng);
    }
    // Front in (length, L]: the rear starts strictly inside the segment.
    std::uniform_real_distribution<double> offset(0.0, road - length);
    bool ok = false;
    for (int tries = 0; tries < kPlacementRetries && !ok; ++tries) {
      auto candidate = make_vehicle(road - offset(rng), lane,
                                    config.background_speed_mps, decel, length);
      ok = std::all_of(placed.begin(), placed.end(), [&](const VehicleState& other) {
        return gap_ok(candidate, other, config.min_gap_m);
      });
      if (ok) placed.push_back(candidate);
    }
    if (!ok) {
      throw InfeasibleDensityError("could not place vehicle " + std::to_string(k + 1) +
                                   " of " + std::to_string(n) + " after " +
                                   std::to_string(kPlacementRetries) + " attempts");
    }
  }
  std::sort(placed.begin(), placed.end(), [](const VehicleState& a, const VehicleState& b) {
    if (a.front_pos_m != b.front_pos_m) return a.front_pos_m < b.front_pos_m;
    return a.lane < b.lane;
  });
  return pad_state(placed, config.pad_size);
}

PaddedState generate_scenario(const ScenarioSpec& spec, const RoadConfig& config) {
  Rng rng(spec.seed);
  return generate_scenario(spec, config, rng);
}

void save_scenario(const PaddedState& state, const std::filesystem::path& path) {
  CsvTable table;
  table.header = {"x", "lane", "v", "z", "b_star", "length"};
  for (const auto& v : state.real_rows()) {
    table.add_row({format_exact(v.front_pos_m), std::to_string(v.lane),
                   format_exact(v.speed_mps), v.yielding ? "1" : "0",
                   format_exact(v.comfort_decel_mps2), format_exact(v.length_m)});
  }
  table.write(path);
}

std::vector<VehicleState> load_scenario_rows(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  const auto cx = table.column("x");
  const auto clane = table.column("lane");
  const auto cv = table.column("v");
  const auto cz = table.column("z");
  const auto cb = table.column("b_star");
  const auto cl = table.column("length");
  std::vector<VehicleState> rows;
  for (const auto& r : table.rows) {
    const auto lane = parse_int(r[clane], "lane");
    const auto z = parse_int(r[cz], "z");
    if ((lane != 0 && lane != 1) || (z != 0 && z != 1)) {
      throw IoError("lane and z must be 0 or 1 in '" + path.string() + "'");
    }
    auto v = make_vehicle(parse_double(r[cx], "x"), static_cast<int>(lane),
                          parse_double(r[cv], "v"), parse_double(r[cb], "b_star"),
                          parse_double(r[cl], "length"), z == 1);
    if (!std::isfinite(v.front_pos_m) || !(v.speed_mps >= 0.0) ||
        !(v.comfort_decel_mps2 > 0.0) || !(v.length_m > 0.0) ||
        !std::isfinite(v.speed_mps) || !std::isfinite(v.comfort_decel_mps2) ||
        !std::isfinite(v.length_m)) {
      throw IoError("non-physical vehicle record in '" + path.string() + "'");
    }
    rows.push_back(v);
  }
  return rows;
}

PaddedState load_scenario(const std::filesystem::path& path, int pad_size) {
  const auto rows = load_scenario_rows(path);
  return pad_state(rows, pad_size);
}

}  // namespace dqjl
