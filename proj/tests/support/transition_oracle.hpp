#pragma once

// Test-only reimplementation of the road transition, written directly from
// the transition-matrix form:
//
//   x' = x + v dt
//   v' = max(0, v + a dt)     a = 0 while continuing or reacting,
//                             a = -max(0.1, b* + noise) once braking
//   z' = 1 if instructed or already yielding
//   y' = 1 if y = 0, z = 1, v' = 0 and the lower slot is free
//
// It shares no code with src/env.cpp; the only common ground is the order in
// which the two consume the noise generator (reaction draw of the instructed
// vehicle first, then one deceleration draw per braking vehicle by index).

#include <algorithm>
#include <random>
#include <vector>

#include "dqjl/env.hpp"

namespace dqjl::oracle {

struct Row {
  double x, y, v, z, b, l;
  bool real;
  int reaction;
};

struct Result {
  std::vector<Row> rows;
  double reward;
  bool collided;
  bool established;
};

inline std::vector<Row> rows_of(const PaddedState& s) {
  std::vector<Row> out;
  for (const auto& r : s.rows) {
    out.push_back({r.front_pos_m, double(r.lane), r.speed_mps, r.yielding ? 1.0 : 0.0,
                   r.comfort_decel_mps2, r.length_m, !r.trivial, r.reaction_steps_left});
  }
  return out;
}

inline bool gone(const Row& r, double L) { return r.real && r.x - r.l > L; }

inline Result transition(const PaddedState& s, int action, const RoadConfig& c,
                         Rng& rng) {
  std::vector<Row> rows = rows_of(s);
  const double L = c.segment_length_m;
  const double d = c.min_gap_m;
  const double dt = c.dt_s;

  if (action >= 0) {
    Row& r = rows[std::size_t(action)];
    r.z = 1.0;
    std::geometric_distribution<int> geo(dt / c.mean_reaction_s);
    r.reaction = 1 + geo(rng);
  }

  for (Row& r : rows) {
    if (!r.real || gone(r, L)) continue;
    double accel = 0.0;
    if (r.z == 1.0 && r.reaction > 0) {
      r.reaction -= 1;
    } else if (r.z == 1.0 && r.v > 0.0) {
      const double sigma = r.y == 0.0 ? c.sigma_pullover : c.sigma_brake;
      double noise = 0.0;
      if (sigma > 0.0) noise = std::normal_distribution<double>(0.0, sigma)(rng);
      accel = -std::max(0.1, r.b + noise);
    }
    const double x_next = r.x + r.v * dt;
    const double v_next = std::max(0.0, r.v + accel * dt);
    r.x = x_next;
    r.v = v_next;
  }

  for (std::size_t i = 0; i < rows.size(); ++i) {
    Row& r = rows[i];
    if (!r.real || gone(r, L)) continue;
    if (!(r.y == 0.0 && r.z == 1.0 && r.v == 0.0)) continue;
    bool free = true;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const Row& o = rows[j];
      if (j == i || !o.real || gone(o, L) || o.y != 1.0) continue;
      const bool overlaps = o.x >= r.x - r.l - d && o.x - o.l <= r.x + d;
      if (overlaps) free = false;
    }
    if (free) r.y = 1.0;
  }

  bool collided = false;
  for (const Row& a : rows) {
    for (const Row& b : rows) {
      if (&a == &b || !a.real || !b.real || gone(a, L) || gone(b, L)) continue;
      if (a.y != b.y || a.x > b.x) continue;
      if (!(a.x + d <= b.x - b.l)) collided = true;
    }
  }

  double occupancy = 0.0;
  for (const Row& r : rows) {
    if (r.real && r.y == 0.0 && r.x - r.l <= L) occupancy += 1.0;
  }
  return {rows, collided ? c.collision_reward : -occupancy, collided,
          !collided && occupancy == 0.0};
}

}  // namespace dqjl::oracle
