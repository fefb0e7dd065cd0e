#include <gtest/gtest.h>

#include "dqjl/config.hpp"
#include "dqjl/errors.hpp"

using namespace dqjl;

TEST(RunConfig, DefaultsMatchReferenceSetup) {
  const auto c = default_run_config();
  EXPECT_EQ(c.road.segment_length_m, 150.0);
  EXPECT_EQ(c.road.dt_s, 0.2);
  EXPECT_EQ(c.road.pad_size, 20);
  EXPECT_EQ(c.road.min_gap_m, 0.2);
  EXPECT_EQ(c.road.sigma_pullover, 0.8);
  EXPECT_EQ(c.road.sigma_brake, 0.5);
  EXPECT_EQ(c.road.emv_max_speed_mps, 10.0);
  EXPECT_EQ(c.train.batch_size, 64);
  EXPECT_EQ(c.train.replay_capacity, 100000u);
  EXPECT_EQ(c.train.target_sync_steps, 100);
  EXPECT_EQ(c.train.gamma, 0.99);
  EXPECT_EQ(c.train.episodes, 2000);
  EXPECT_EQ(c.sweep.runs_per_cell, 5);
  EXPECT_EQ(c.scenario.spacing_m_per_veh, 12.5);
}

TEST(RunConfig, JsonRoundTrip) {
  auto c = default_run_config();
  c.road.pad_size = 8;
  c.train.variant = Variant::D3qn;
  c.scenario.n_vehicles = 6;
  c.sweep.speeds_mps = {4.0};
  c.seed = 77;
  c.apply_master_seed();
  const auto text = run_config_to_json(c);
  const auto back = parse_run_config(text);
  EXPECT_EQ(back.road.pad_size, 8);
  EXPECT_EQ(back.train.variant, Variant::D3qn);
  EXPECT_EQ(back.scenario.n_vehicles, 6);
  EXPECT_EQ(back.sweep.speeds_mps, std::vector<double>{4.0});
  EXPECT_EQ(back.train.seed, 77u);
  EXPECT_EQ(run_config_to_json(back), text);
}

TEST(RunConfig, PartialOverride) {
  const auto c = parse_run_config(R"({"road": {"pad_size": 5}, "seed": 9})");
  EXPECT_EQ(c.road.pad_size, 5);
  EXPECT_EQ(c.road.segment_length_m, 150.0);
  EXPECT_EQ(c.sweep.seed, 9u);
}

TEST(RunConfig, RejectsUnknownAndMalformed) {
  EXPECT_THROW(parse_run_config(R"({"road": {"lenght": 5}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"roads": {}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"road": {"pad_size": "big"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"train": {"variant": "bogus"}})"), ConfigError);
  EXPECT_THROW(parse_run_config("{not json"), ConfigError);
  EXPECT_THROW(parse_run_config("[1, 2]"), ConfigError);
}
