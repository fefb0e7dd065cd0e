#include <gtest/gtest.h>

#include <cmath>

#include "dqjl/errors.hpp"
#include "dqjl/rollout.hpp"
#include "support/gradient_check.hpp"

using namespace dqjl;

namespace {

RoadConfig road(int pad = 6, double length = 60.0) {
  RoadConfig c;
  c.pad_size = pad;
  c.segment_length_m = length;
  return c;
}

ScenarioSpec count_spec(int n, std::uint64_t seed) {
  ScenarioSpec s;
  s.n_vehicles = n;
  s.seed = seed;
  return s;
}

// Output 0 biased up: the greedy policy never instructs anyone.
QNetworkd passive_net(int pad) {
  auto net = make_zero_qnetwork<double>(Architecture::Standard, pad, 4, 4);
  net.layers.back().bias(0) = 1.0;
  return net;
}

// Output i + 1 biased up: always instructs the lowest-index valid vehicle.
QNetworkd eager_net(int pad) {
  auto net = make_zero_qnetwork<double>(Architecture::Standard, pad, 4, 4);
  for (int i = 0; i <= pad; ++i) net.layers.back().bias(i) = i == 0 ? -1.0 : 1.0 - 0.01 * i;
  return net;
}

}  // namespace

TEST(Indicator, EmptyRoadIsImmediatelyEstablished) {
  const auto c = road();
  const auto s = pad_state({}, c.pad_size);
  const auto ind = generate_indicator(passive_net(6), s, c, 1);
  EXPECT_TRUE(ind.established);
  EXPECT_EQ(ind.final_step, 0);
  EXPECT_TRUE(ind.yield_step.empty());
}

TEST(Indicator, RecordsFirstInstructionStep) {
  const auto c = road();
  const auto s = generate_scenario(count_spec(4, 3), c);
  const auto ind = generate_indicator(eager_net(6), s, c, 9);
  ASSERT_EQ(ind.yield_step.size(), 4u);
  // One new vehicle per step in index order while targets remain.
  for (int i = 0; i < 4; ++i) {
    EXPECT_LE(ind.yield_step[std::size_t(i)], 3);
  }
  for (std::size_t t = 0; t < ind.actions.size(); ++t) {
    const int a = ind.actions[t];
    if (a >= 0) EXPECT_EQ(ind.yield_step[std::size_t(a)], int(t));
  }
  const auto table = indicator_table(ind, c.dt_s);
  ASSERT_EQ(table.rows.size(), 4u);
  EXPECT_EQ(table.header, (std::vector<std::string>{"vehicle_index", "T_step", "T_seconds"}));
}

TEST(Indicator, PassivePolicyNeverEstablishesWithUpperLaneTraffic) {
  auto c = road();
  std::vector<VehicleState> rows{make_vehicle(20.0, 0, 0.0, 3.5, 4.5)};  // stalled
  const auto s = pad_state(rows, c.pad_size);
  const auto ind = generate_indicator(passive_net(6), s, c, 2);
  EXPECT_FALSE(ind.established);
  EXPECT_FALSE(ind.collided);
  EXPECT_EQ(ind.final_step, c.step_cap());
  EXPECT_EQ(ind.yield_step[0], -1);
}

TEST(Indicator, ReplayReproducesRollout) {
  std::mt19937_64 gen(4);
  const auto c = road();
  for (int trial = 0; trial < 20; ++trial) {
    const auto net = oracle::random_small_net(Architecture::Dueling, 6, 8, 8, gen);
    const auto s = generate_scenario(count_spec(5, gen()), c);
    const std::uint64_t seed = gen();
    const auto ind = generate_indicator(net, s, c, seed);
    const auto replay = replay_indicator(ind, s, c, seed);
    EXPECT_EQ(replay.final_step, ind.final_step);
    EXPECT_EQ(replay.established, ind.established);
    EXPECT_EQ(replay.collided, ind.collided);
  }
}

TEST(Indicator, PadMismatchIsShapeError) {
  const auto c = road();
  const auto s = generate_scenario(count_spec(3, 1), c);
  try {
    generate_indicator(passive_net(8), s, c, 1);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("8"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("6"), std::string::npos);
  }
}

TEST(Emv, EmptyRoadAtFullSpeed) {
  const RoadConfig c;
  const auto s = pad_state({}, c.pad_size);
  for (const Policy& p : {Policy(BenchmarkPolicy{}), Policy(RlPolicy{nullptr})}) {
    if (std::holds_alternative<RlPolicy>(p)) continue;
    Rng rng(1);
    const auto r = simulate_emv_passing(s, p, c, EmvConfig{}, rng);
    EXPECT_NEAR(r.passing_time_s, 15.0, 1e-9);
    EXPECT_TRUE(r.established);
  }
  const auto net = passive_net(c.pad_size);
  Rng rng(1);
  const auto r = simulate_emv_passing(s, RlPolicy{&net}, c, EmvConfig{}, rng);
  EXPECT_NEAR(r.passing_time_s, 15.0, 1e-9);
  EXPECT_EQ(r.policy, "rl");
}

TEST(Emv, PassingTimeFallsWithEmvSpeed) {
  RoadConfig c;
  const auto s = pad_state({}, c.pad_size);
  double last = 1e9;
  for (double vmax : {4.0, 6.0, 10.0, 13.0}) {
    c.emv_max_speed_mps = vmax;
    Rng rng(1);
    const double t = simulate_emv_passing(s, BenchmarkPolicy{}, c, EmvConfig{}, rng).passing_time_s;
    EXPECT_NEAR(t, 150.0 / vmax, 1e-9);
    EXPECT_LT(t, last);
    last = t;
  }
}

TEST(Emv, StalledBlockerSaturatesAtHorizon) {
  const RoadConfig c;
  // Lane-0 vehicle stopped without instruction; the passive RL policy leaves it.
  std::vector<VehicleState> rows{make_vehicle(80.0, 0, 0.0, 3.5, 4.5)};
  const auto s = pad_state(rows, c.pad_size);
  const auto net = passive_net(c.pad_size);
  EmvConfig emv;
  emv.max_time_s = 30.0;
  Rng rng(1);
  const auto r = simulate_emv_passing(s, RlPolicy{&net}, c, emv, rng);
  EXPECT_FALSE(r.established);
  EXPECT_FALSE(r.collided);
  EXPECT_EQ(r.passing_time_s, 30.0);
}

TEST(Emv, FollowsSlowLeader) {
  RoadConfig c;
  c.segment_length_m = 40.0;
  // Leader just ahead of the EMV at 5 m/s: the EMV cannot exceed it before it departs.
  std::vector<VehicleState> rows{make_vehicle(10.0, 0, 5.0, 3.5, 4.5)};
  const auto s = pad_state(rows, c.pad_size);
  const auto net = passive_net(c.pad_size);
  Rng rng(1);
  const auto r = simulate_emv_passing(s, RlPolicy{&net}, c, EmvConfig{}, rng);
  EXPECT_TRUE(r.established);
  EXPECT_GT(r.passing_time_s, 40.0 / 10.0 + 1.0);
  EXPECT_LT(r.passing_time_s, 40.0 / 5.0 + 1e-9);
}

TEST(Benchmark, InstructsOnlyVehiclesWithinReach) {
  const RoadConfig c;
  std::vector<VehicleState> rows{make_vehicle(5.0, 0, 5, 3.5, 4.5),
                                 make_vehicle(20.0, 1, 5, 3.5, 4.5),
                                 make_vehicle(35.0, 0, 5, 3.5, 4.5, true),
                                 make_vehicle(39.0, 0, 5, 3.5, 4.5),
                                 make_vehicle(60.0, 0, 5, 3.5, 4.5)};
  const auto s = pad_state(rows, c.pad_size);
  EXPECT_EQ(benchmark_instructions(s, 10.0, 30.0, c), (std::vector<int>{1, 3}));
  EXPECT_EQ(benchmark_instructions(s, 0.0, 30.0, c), (std::vector<int>{0, 1}));
  EXPECT_TRUE(benchmark_instructions(s, 100.0, 30.0, c).empty());
  EXPECT_THROW(benchmark_instructions(s, 0.0, 0.0, c), ConfigError);
}

TEST(Benchmark, ResultBounds) {
  const RoadConfig c;
  ScenarioSpec spec;
  spec.spacing_m_per_veh = 15.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    spec.seed = seed;
    const auto s = generate_scenario(spec, c);
    Rng rng(seed);
    const auto r = simulate_emv_passing(s, BenchmarkPolicy{}, c, EmvConfig{}, rng);
    EXPECT_GE(r.passing_time_s, 15.0 - 1e-9);
    EXPECT_LE(r.passing_time_s, 120.0);
    // A yielding vehicle stuck on lane 0 behind an occupied slot blocks the EMV
    // for good, so a run may end unestablished without a collision.
    if (!r.established) EXPECT_EQ(r.passing_time_s, 120.0);
    EXPECT_FALSE(r.established && r.collided);
  }
}

// Lane-0 vehicles ahead of a free-running EMV are instructed before it is
// within trigger - v_b * dt of them.
TEST(Benchmark, InstructsBeforeEmvCloses) {
  const RoadConfig c;
  const EmvConfig emv;
  ScenarioSpec spec;
  spec.spacing_m_per_veh = 15.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    spec.seed = seed;
    auto state = generate_scenario(spec, c);
    Rng rng(seed);
    double x_emv = 0.0;
    for (int k = 0; k < 20; ++k) {
      const auto picks = benchmark_instructions(state, x_emv, emv.trigger_m, c);
      for (int i : picks) {
        const auto& v = state.rows[std::size_t(i)];
        if (v.lane == 0 && v.front_pos_m > emv.trigger_m) {
          EXPECT_GT(v.front_pos_m - x_emv, emv.trigger_m - c.background_speed_mps * c.dt_s);
        }
      }
      const auto out = step_multi(state, picks, c, rng);
      if (out.collided) break;
      state = out.next_state;
      x_emv += c.emv_max_speed_mps * c.dt_s;
    }
  }
}

TEST(Sweep, RowCountsAndArithmetic) {
  RoadConfig c = road(8, 60.0);
  SweepConfig sweep;
  sweep.spacings_m_per_veh = {10.0, 15.0};
  sweep.speeds_mps = {3.0, 5.0};
  sweep.runs_per_cell = 3;
  const auto net = passive_net(8);
  const auto result = run_sweep(sweep, c, ScenarioSpec{}, EmvConfig{}, &net);
  EXPECT_EQ(result.detail.size(), 2u * 2u * 3u * 2u);
  EXPECT_EQ(result.aggregate.size(), 2u * 2u * 2u);
  for (const auto& agg : result.aggregate) {
    double sum = 0;
    int n = 0;
    for (const auto& d : result.detail) {
      if (d.spacing_m_per_veh == agg.spacing_m_per_veh && d.speed_mps == agg.speed_mps &&
          d.policy == agg.policy) {
        sum += d.passing_time_s;
        ++n;
      }
    }
    EXPECT_EQ(n, 3);
    EXPECT_DOUBLE_EQ(agg.mean_passing_time_s, sum / 3.0);
  }
  // Both policies see the same scenario seed within a run.
  for (std::size_t i = 0; i + 3 < result.detail.size(); i += 6) {
    EXPECT_EQ(result.detail[i].seed, result.detail[i + 3].seed);
  }
  EXPECT_EQ(result.detail_table().rows.size(), result.detail.size());
  const double imp = improvement(result, 10.0, 3.0);
  const double rl = result.mean(10.0, 3.0, "rl"), bench = result.mean(10.0, 3.0, "benchmark");
  EXPECT_DOUBLE_EQ(imp, (bench - rl) / bench);
}

TEST(Sweep, DeterministicAcrossJobCounts) {
  RoadConfig c = road(8, 60.0);
  SweepConfig sweep;
  sweep.spacings_m_per_veh = {10.0, 12.5};
  sweep.speeds_mps = {3.0, 5.0};
  sweep.runs_per_cell = 2;
  sweep.include_rl = false;
  const auto a = run_sweep(sweep, c, ScenarioSpec{}, EmvConfig{}, nullptr);
  sweep.jobs = 3;
  const auto b = run_sweep(sweep, c, ScenarioSpec{}, EmvConfig{}, nullptr);
  EXPECT_EQ(a.detail_table().to_string(), b.detail_table().to_string());
  EXPECT_EQ(a.aggregate_table().to_string(), b.aggregate_table().to_string());
}

TEST(Sweep, InfeasibleCellIsReportedNotFatal) {
  RoadConfig c = road(4, 60.0);
  SweepConfig sweep;
  sweep.spacings_m_per_veh = {10.0};  // six vehicles, pad size four
  sweep.speeds_mps = {5.0};
  sweep.include_rl = false;
  const auto r = run_sweep(sweep, c, ScenarioSpec{}, EmvConfig{}, nullptr);
  ASSERT_EQ(r.aggregate.size(), 1u);
  EXPECT_FALSE(r.aggregate[0].feasible);
  EXPECT_TRUE(r.detail.empty());
  EXPECT_TRUE(std::isnan(r.mean(10.0, 5.0, "benchmark")));
}

TEST(Sweep, RejectsBadConfig) {
  const RoadConfig c;
  SweepConfig sweep;
  EXPECT_THROW(run_sweep(sweep, c, ScenarioSpec{}, EmvConfig{}, nullptr), ConfigError);
  sweep.include_rl = false;
  sweep.runs_per_cell = 0;
  EXPECT_THROW(run_sweep(sweep, c, ScenarioSpec{}, EmvConfig{}, nullptr), ConfigError);
}
