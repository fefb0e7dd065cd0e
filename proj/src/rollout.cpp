#include "dqjl/rollout.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "dqjl/agent.hpp"
#include "dqjl/errors.hpp"

namespace dqjl {

ActionIndex YieldingTimeIndicator::action_at(int step) const {
  for (std::size_t i = 0; i < yield_step.size(); ++i) {
    if (yield_step[i] == step) return ActionIndex(static_cast<int>(i));
  }
  return ActionIndex{};
}

namespace {

ActionIndex greedy_action(const QNetworkd& net, const PaddedState& state,
                          const RoadConfig& config) {
  const auto q = forward(net, network_features(state, config));
  return ActionIndex::from_output_index(masked_argmax(q, valid_action_mask(state, config)));
}

void check_compatible(const QNetworkd& net, const PaddedState& state) {
  if (net.pad_size != state.pad_size()) {
    throw ShapeError("checkpoint pad size " + std::to_string(net.pad_size) +
                     " does not match scenario pad size " +
                     std::to_string(state.pad_size()));
  }
}

}  // namespace

YieldingTimeIndicator generate_indicator(const QNetworkd& net, const PaddedState& initial,
                                         const RoadConfig& config,
                                         std::uint64_t noise_seed) {
  check_compatible(net, initial);
  Rng rng(noise_seed);
  YieldingTimeIndicator ind;
  ind.yield_step.assign(static_cast<std::size_t>(initial.n_real), -1);
  PaddedState state = initial;
  ind.established = upper_lane_occupancy(state, config.segment_length_m) == 0;
  const int cap = config.step_cap();
  for (int t = 0; t < cap && !ind.established && !ind.collided; ++t) {
    const ActionIndex a = greedy_action(net, state, config);
    ind.actions.push_back(a.vehicle);
    if (!a.is_none() && a.vehicle < initial.n_real) {
      auto& slot = ind.yield_step[static_cast<std::size_t>(a.vehicle)];
      if (slot < 0) slot = t;
    }
    StepOutcome out = step(state, a, config, rng);
    ind.final_step = t + 1;
    ind.collided = out.collided;
    ind.established = out.dqjl_established;
    state = std::move(out.next_state);
  }
  return ind;
}

RolloutResult replay_indicator(const YieldingTimeIndicator& indicator,
                               const PaddedState& initial, const RoadConfig& config,
                               std::uint64_t noise_seed) {
  Rng rng(noise_seed);
  RolloutResult result;
  PaddedState state = initial;
  result.established = upper_lane_occupancy(state, config.segment_length_m) == 0;
  const int cap = config.step_cap();
  for (int t = 0; t < cap && !result.established && !result.collided; ++t) {
    StepOutcome out = step(state, indicator.action_at(t), config, rng);
    result.final_step = t + 1;
    result.total_return += out.reward;
    result.collided = out.collided;
    result.established = out.dqjl_established;
    state = std::move(out.next_state);
  }
  return result;
}

CsvTable indicator_table(const YieldingTimeIndicator& indicator, double dt_s) {
  CsvTable table;
  table.header = {"vehicle_index", "T_step", "T_seconds"};
  for (std::size_t i = 0; i < indicator.yield_step.size(); ++i) {
    const int t = indicator.yield_step[i];
    table.add_row({std::to_string(i), std::to_string(t),
                   t < 0 ? "-1" : format_exact(t * dt_s)});
  }
  return table;
}

std::string policy_tag(const Policy& policy) {
  return std::holds_alternative<RlPolicy>(policy) ? "rl" : "benchmark";
}

std::vector<int> benchmark_instructions(const PaddedState& state, double emv_pos_m,
                                        double trigger_m, const RoadConfig& config) {
  if (!(trigger_m > 0.0)) throw ConfigError("trigger distance must be > 0");
  const auto mask = valid_action_mask(state, config);
  std::vector<int> out;
  for (int i = 0; i < state.n_real; ++i) {
    if (!mask[static_cast<std::size_t>(i) + 1]) continue;
    const double ahead = state.rows[static_cast<std::size_t>(i)].front_pos_m - emv_pos_m;
    if (ahead >= 0.0 && ahead <= trigger_m) out.push_back(i);
  }
  return out;
}

PassingTimeResult simulate_emv_passing(const PaddedState& initial, const Policy& policy,
                                       const RoadConfig& config, const EmvConfig& emv,
                                       Rng& rng) {
  config.validate();
  const auto* rl = std::get_if<RlPolicy>(&policy);
  if (rl) {
    if (!rl->net) throw ConfigError("RL policy needs a network");
    check_compatible(*rl->net, initial);
  }
  const double road = config.segment_length_m;
  const double dt = config.dt_s;
  const double headway = emv.headway_m(config);
  const int max_steps = static_cast<int>(std::ceil(emv.max_time_s / dt - 1e-9));
  const int env_cap = config.step_cap();

  PassingTimeResult result;
  result.policy = policy_tag(policy);
  result.passing_time_s = emv.max_time_s;
  result.n_vehicles = initial.n_real;

  PaddedState state = initial;
  bool instructing =
      upper_lane_occupancy(state, road) > 0;  // RL stops once the lane is clear
  double x_emv = 0.0;
  for (int k = 0; k < max_steps; ++k) {
    StepOutcome out;
    if (rl) {
      const ActionIndex a = instructing && k < env_cap ? greedy_action(*rl->net, state, config)
                                                       : ActionIndex{};
      out = step(state, a, config, rng);
      if (out.dqjl_established) instructing = false;
    } else {
      const auto trigger = std::get<BenchmarkPolicy>(policy).trigger_m;
      out = step_multi(state, benchmark_instructions(state, x_emv, trigger, config), config,
                       rng);
    }
    if (out.collided) {
      result.collided = true;
      return result;
    }
    state = std::move(out.next_state);

    double speed = config.emv_max_speed_mps;
    double limit = std::numeric_limits<double>::infinity();
    for (const auto& v : state.real_rows()) {
      if (v.lane != 0 || v.departed(road) || v.front_pos_m < x_emv) continue;
      limit = std::min(limit, v.rear_pos_m() - config.min_gap_m);
      if (v.rear_pos_m() < x_emv + headway) speed = std::min(speed, v.speed_mps);
    }
    const double x_next = std::max(x_emv, std::min(x_emv + speed * dt, limit));
    if (x_next >= road) {
      const double moved = x_next - x_emv;
      result.passing_time_s = k * dt + (road - x_emv) / moved * dt;
      result.established = true;
      return result;
    }
    x_emv = x_next;
  }
  return result;
}

std::uint64_t sweep_run_seed(std::uint64_t master, std::size_t spacing_index,
                             std::size_t speed_index, int run) {
  std::seed_seq seq{static_cast<std::uint32_t>(master),
                    static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(spacing_index),
                    static_cast<std::uint32_t>(speed_index), static_cast<std::uint32_t>(run)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

namespace {

Rng noise_stream(std::uint64_t run_seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(run_seed),
                    static_cast<std::uint32_t>(run_seed >> 32), 0x6e6f6973u};
  return Rng(seq);
}

struct CellOutput {
  std::vector<SweepDetailRow> detail;
  std::vector<SweepAggregateRow> aggregate;
};

CellOutput run_cell(const SweepConfig& sweep, const RoadConfig& base_road,
                    const ScenarioSpec& base_spec, const EmvConfig& emv,
                    const QNetworkd* net, std::size_t si, std::size_t vi) {
  const double spacing = sweep.spacings_m_per_veh[si];
  const double speed = sweep.speeds_mps[vi];
  RoadConfig road = base_road;
  road.background_speed_mps = speed;
  if (net) road.pad_size = net->pad_size;
  ScenarioSpec spec = base_spec;
  spec.n_vehicles.reset();
  spec.n_vehicles_min.reset();
  spec.spacing_m_per_veh = spacing;

  std::vector<Policy> policies;
  if (sweep.include_rl) policies.emplace_back(RlPolicy{net});
  if (sweep.include_benchmark) policies.emplace_back(BenchmarkPolicy{emv.trigger_m});

  CellOutput cell;
  std::vector<std::vector<SweepDetailRow>> per_policy(policies.size());
  std::string failure;
  for (int r = 0; r < sweep.runs_per_cell && failure.empty(); ++r) {
    const auto seed = sweep_run_seed(sweep.seed, si, vi, r);
    spec.seed = seed;
    PaddedState initial;
    try {
      initial = generate_scenario(spec, road);
    } catch (const TooManyVehiclesError& e) {
      failure = e.what();
      break;
    } catch (const InfeasibleDensityError& e) {
      failure = e.what();
      break;
    }
    for (std::size_t p = 0; p < policies.size(); ++p) {
      Rng rng = noise_stream(seed);
      const auto res = simulate_emv_passing(initial, policies[p], road, emv, rng);
      per_policy[p].push_back({spacing, speed, res.policy, r, seed, res.passing_time_s,
                               res.established, res.collided});
    }
  }
  for (std::size_t p = 0; p < policies.size(); ++p) {
    SweepAggregateRow agg;
    agg.spacing_m_per_veh = spacing;
    agg.speed_mps = speed;
    agg.policy = policy_tag(policies[p]);
    if (!failure.empty()) {
      agg.feasible = false;
      agg.note = failure;
      agg.mean_passing_time_s = std::numeric_limits<double>::quiet_NaN();
      cell.aggregate.push_back(agg);
      continue;
    }
    double sum = 0.0;
    for (const auto& row : per_policy[p]) {
      sum += row.passing_time_s;
      agg.established += row.established ? 1 : 0;
      agg.collided += row.collided ? 1 : 0;
    }
    agg.runs = static_cast<int>(per_policy[p].size());
    agg.mean_passing_time_s = agg.runs ? sum / agg.runs : 0.0;
    cell.aggregate.push_back(agg);
    cell.detail.insert(cell.detail.end(), per_policy[p].begin(), per_policy[p].end());
  }
  return cell;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& sweep, const RoadConfig& road,
                      const ScenarioSpec& base_spec, const EmvConfig& emv,
                      const QNetworkd* net) {
  if (sweep.spacings_m_per_veh.empty() || sweep.speeds_mps.empty()) {
    throw ConfigError("sweep grids must be non-empty");
  }
  if (sweep.runs_per_cell < 1) throw ConfigError("runs_per_cell must be >= 1");
  if (!sweep.include_rl && !sweep.include_benchmark) {
    throw ConfigError("sweep needs at least one policy");
  }
  if (sweep.include_rl && !net) throw ConfigError("RL sweep needs a checkpoint");

  const std::size_t n_speeds = sweep.speeds_mps.size();
  const std::size_t n_cells = sweep.spacings_m_per_veh.size() * n_speeds;
  std::vector<CellOutput> cells(n_cells);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t c = next++; c < n_cells; c = next++) {
      try {
        cells[c] = run_cell(sweep, road, base_spec, emv, net, c / n_speeds, c % n_speeds);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(sweep.jobs, static_cast<int>(n_cells)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  SweepResult result;
  for (auto& cell : cells) {
    result.detail.insert(result.detail.end(), cell.detail.begin(), cell.detail.end());
    result.aggregate.insert(result.aggregate.end(), cell.aggregate.begin(),
                            cell.aggregate.end());
  }
  return result;
}

CsvTable SweepResult::detail_table() const {
  CsvTable table;
  table.header = {"spacing_m_per_veh", "v_b_mps", "policy", "run", "seed",
                  "passing_time_s", "established", "collided"};
  for (const auto& r : detail) {
    table.add_row({format_exact(r.spacing_m_per_veh), format_exact(r.speed_mps), r.policy,
                   std::to_string(r.run), std::to_string(r.seed),
                   format_exact(r.passing_time_s), r.established ? "1" : "0",
                   r.collided ? "1" : "0"});
  }
  return table;
}

CsvTable SweepResult::aggregate_table() const {
  CsvTable table;
  table.header = {"spacing_m_per_veh", "v_b_mps", "policy", "runs",
                  "mean_passing_time_s", "established", "collided", "feasible"};
  for (const auto& r : aggregate) {
    table.add_row({format_exact(r.spacing_m_per_veh), format_exact(r.speed_mps), r.policy,
                   std::to_string(r.runs), format_exact(r.mean_passing_time_s),
                   std::to_string(r.established), std::to_string(r.collided),
                   r.feasible ? "1" : "0"});
  }
  return table;
}

double SweepResult::mean(double spacing, double speed, const std::string& policy) const {
  for (const auto& r : aggregate) {
    if (r.spacing_m_per_veh == spacing && r.speed_mps == speed && r.policy == policy) {
      return r.feasible ? r.mean_passing_time_s : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double improvement(const SweepResult& result, double spacing, double speed) {
  const double rl = result.mean(spacing, speed, "rl");
  const double bench = result.mean(spacing, speed, "benchmark");
  return (bench - rl) / bench;
}

}  // namespace dqjl
