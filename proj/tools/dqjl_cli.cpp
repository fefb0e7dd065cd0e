// dqjl: train yield-coordination agents, extract yielding time indicators and
// compare EMV passing times against a siren-style benchmark.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include "dqjl/agent.hpp"
#include "dqjl/config.hpp"
#include "dqjl/errors.hpp"
#include "dqjl/qnet.hpp"
#include "dqjl/rollout.hpp"
#include "dqjl/scenario.hpp"
#include "dqjl/svg.hpp"
#include "dqjl/table.hpp"

namespace fs = std::filesystem;
using namespace dqjl;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr const char* kOutputRootEnv = "DQJL_OUTPUT_ROOT";

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> pad_size;
  std::optional<double> segment_length;
  std::optional<double> speed;
  std::optional<int> n_vehicles;
  std::optional<double> spacing;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", o.out_dir, "Output directory");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--pad-size", o.pad_size, "State pad size K")->check(CLI::PositiveNumber);
  cmd->add_option("--segment-length", o.segment_length, "Road segment length L [m]")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--speed", o.speed, "Background speed v_b [m/s]")->check(CLI::PositiveNumber);
  cmd->add_option("--n-vehicles", o.n_vehicles, "Vehicles per scenario")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--spacing", o.spacing, "Average spacing [m/veh]")->check(CLI::PositiveNumber);
}

RunConfig resolve(const CommonOptions& o, const std::string& command) {
  RunConfig c = o.config_path.empty() ? default_run_config() : load_run_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.pad_size) c.road.pad_size = *o.pad_size;
  if (o.segment_length) c.road.segment_length_m = *o.segment_length;
  if (o.speed) c.road.background_speed_mps = *o.speed;
  if (o.n_vehicles) {
    c.scenario.n_vehicles = *o.n_vehicles;
    c.scenario.spacing_m_per_veh.reset();
  }
  if (o.spacing) {
    c.scenario.spacing_m_per_veh = *o.spacing;
    c.scenario.n_vehicles.reset();
  }
  if (!o.out_dir.empty()) {
    c.output_dir = o.out_dir;
  } else if (c.output_dir.empty()) {
    const char* root = std::getenv(kOutputRootEnv);
    c.output_dir = (fs::path(root && *root ? root : "runs") / command).string();
  }
  c.apply_master_seed();
  c.road.validate();
  return c;
}

fs::path prepare_output(const RunConfig& c) {
  const fs::path out(c.output_dir);
  fs::create_directories(out);
  write_text_file(out / "config.json", run_config_to_json(c));
  return out;
}

QNetworkd load_matching_checkpoint(const std::string& path, const RunConfig& c) {
  auto net = load_checkpoint(path);
  if (net.pad_size != c.road.pad_size) {
    throw ShapeError("checkpoint pad size K=" + std::to_string(net.pad_size) +
                     " does not match configured pad size K=" +
                     std::to_string(c.road.pad_size));
  }
  return net;
}

int cmd_train(const CommonOptions& o, std::optional<int> episodes,
              const std::string& variant, bool quiet) {
  RunConfig c = resolve(o, "train");
  if (episodes) c.train.episodes = *episodes;
  if (!variant.empty()) c.train.variant = parse_variant(variant);
  c.train.validate();
  const auto out = prepare_output(c);

  TrainHooks hooks;
  if (!quiet) {
    hooks.on_episode = [&](const EpisodeRecord& e) {
      if ((e.episode + 1) % 100 == 0) {
        std::cerr << "episode " << e.episode + 1 << "/" << c.train.episodes
                  << " return " << format_short(e.total_return) << " eps "
                  << format_short(e.epsilon_at_end) << "\n";
      }
    };
  }
  const auto report = train(c.train, c.road, c.scenario, hooks);
  save_checkpoint(report.online, out / "checkpoint.qnet");
  report.to_table().write(out / "train_report.csv");

  std::vector<double> x, y;
  for (const auto& e : report.episodes) {
    x.push_back(e.episode);
    y.push_back(e.total_return);
  }
  LineChart chart;
  chart.title = std::string(to_string(c.train.variant)) + " training";
  chart.x_label = "episode";
  chart.y_label = "episode return";
  chart.series.push_back({"return", x, y, "#9ecae1"});
  chart.series.push_back({"moving average (50)", x, moving_average(y, 50), "#08519c"});
  write_text_file(out / "learning_curve.svg", render_svg(chart));
  std::cout << "trained " << report.episodes.size() << " episodes, "
            << report.gradient_steps << " gradient steps -> " << out.string() << "\n";
  return 0;
}

int cmd_indicator(const CommonOptions& o, const std::string& checkpoint,
                  const std::string& scenario_path, std::optional<std::uint64_t> noise_seed) {
  RunConfig c = resolve(o, "indicator");
  const auto net = load_matching_checkpoint(checkpoint, c);
  const auto initial = load_scenario(scenario_path, c.road.pad_size);
  const auto out = prepare_output(c);
  const auto ind = generate_indicator(net, initial, c.road, noise_seed.value_or(c.seed));
  indicator_table(ind, c.road.dt_s).write(out / "indicator.csv");

  CsvTable summary;
  summary.header = {"n_vehicles", "established", "collided", "final_step", "final_time_s"};
  summary.add_row({std::to_string(initial.n_real), ind.established ? "1" : "0",
                   ind.collided ? "1" : "0", std::to_string(ind.final_step),
                   format_exact(ind.final_step * c.road.dt_s)});
  summary.write(out / "indicator_summary.csv");
  std::cout << (ind.established ? "DQJL established" : "DQJL not established")
            << " after " << ind.final_step << " steps -> " << out.string() << "\n";
  return 0;
}

int cmd_evaluate(const CommonOptions& o, const std::string& checkpoint,
                 const std::string& scenario_path, int runs) {
  RunConfig c = resolve(o, "evaluate");
  std::optional<QNetworkd> net;
  if (!checkpoint.empty()) net = load_matching_checkpoint(checkpoint, c);
  const auto out = prepare_output(c);

  CsvTable table;
  table.header = {"run", "seed", "policy", "n_vehicles", "passing_time_s", "established",
                  "collided"};
  for (int r = 0; r < runs; ++r) {
    const std::uint64_t seed = sweep_run_seed(c.seed, 0, 0, r);
    PaddedState initial;
    if (!scenario_path.empty()) {
      initial = load_scenario(scenario_path, c.road.pad_size);
    } else {
      auto spec = c.scenario;
      spec.seed = seed;
      initial = generate_scenario(spec, c.road);
    }
    std::vector<Policy> policies{BenchmarkPolicy{c.emv.trigger_m}};
    if (net) policies.insert(policies.begin(), RlPolicy{&*net});
    for (const auto& policy : policies) {
      Rng rng(seed);
      const auto res = simulate_emv_passing(initial, policy, c.road, c.emv, rng);
      table.add_row({std::to_string(r), std::to_string(seed), res.policy,
                     std::to_string(res.n_vehicles), format_exact(res.passing_time_s),
                     res.established ? "1" : "0", res.collided ? "1" : "0"});
    }
  }
  table.write(out / "evaluation.csv");
  std::cout << "evaluated " << runs << " run(s) -> " << out.string() << "\n";
  return 0;
}

int cmd_sweep(const CommonOptions& o, const std::string& checkpoint, std::optional<int> jobs,
              std::optional<int> runs) {
  RunConfig c = resolve(o, "sweep");
  if (jobs) c.sweep.jobs = *jobs;
  if (runs) c.sweep.runs_per_cell = *runs;
  std::optional<QNetworkd> net;
  if (c.sweep.include_rl) {
    if (checkpoint.empty()) throw ConfigError("sweep with the RL policy needs --checkpoint");
    net = load_matching_checkpoint(checkpoint, c);
  }
  const auto out = prepare_output(c);
  const auto result = run_sweep(c.sweep, c.road, c.scenario, c.emv, net ? &*net : nullptr);
  result.detail_table().write(out / "sweep_detail.csv");
  result.aggregate_table().write(out / "sweep_aggregate.csv");

  LineChart chart;
  chart.title = "EMV passing time vs vehicle density";
  chart.x_label = "average spacing [m/veh]";
  chart.y_label = "mean EMV passing time [s]";
  for (double speed : c.sweep.speeds_mps) {
    for (const std::string policy : {"rl", "benchmark"}) {
      ChartSeries s;
      s.name = policy + " v_b=" + format_short(speed);
      for (double spacing : c.sweep.spacings_m_per_veh) {
        s.x.push_back(spacing);
        s.y.push_back(result.mean(spacing, speed, policy));
      }
      chart.series.push_back(std::move(s));
    }
  }
  write_text_file(out / "sweep_passing_time.svg", render_svg(chart));

  if (c.sweep.include_rl && c.sweep.include_benchmark) {
    double best = -std::numeric_limits<double>::infinity();
    double best_spacing = 0, best_speed = 0;
    for (double spacing : c.sweep.spacings_m_per_veh) {
      for (double speed : c.sweep.speeds_mps) {
        const double gain = improvement(result, spacing, speed);
        if (std::isfinite(gain) && gain > best) {
          best = gain;
          best_spacing = spacing;
          best_speed = speed;
        }
      }
    }
    if (std::isfinite(best)) {
      std::cout << "best cell: spacing " << format_short(best_spacing) << " m/veh, v_b "
                << format_short(best_speed) << " m/s, passing-time reduction "
                << format_short(100.0 * best) << "%\n";
    }
  }
  std::cout << "sweep: " << result.detail.size() << " detail rows -> " << out.string() << "\n";
  return 0;
}

int cmd_gen_scenario(const CommonOptions& o) {
  RunConfig c = resolve(o, "gen-scenario");
  const auto out = prepare_output(c);
  const auto state = generate_scenario(c.scenario, c.road);
  save_scenario(state, out / "scenario.csv");
  std::cout << "scenario with " << state.n_real << " vehicles -> "
            << (out / "scenario.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic queue-jump lane coordination with deep Q-learning"};
  app.require_subcommand(1);

  CommonOptions train_o, ind_o, eval_o, sweep_o, gen_o;

  auto* train_cmd = app.add_subcommand("train", "Train a Q-network agent");
  add_common(train_cmd, train_o);
  std::optional<int> episodes;
  std::string variant;
  bool quiet = false;
  train_cmd->add_option("--episodes", episodes, "Training episodes")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--variant", variant, "dqn | ddqn | dueling | d3qn")
      ->check(CLI::IsMember({"dqn", "ddqn", "dueling", "d3qn", "3dqn"}));
  train_cmd->add_flag("-q,--quiet", quiet, "No progress output");

  auto* ind_cmd = app.add_subcommand("indicator", "Generate a yielding time indicator");
  add_common(ind_cmd, ind_o);
  std::string ind_checkpoint, ind_scenario;
  std::optional<std::uint64_t> noise_seed;
  ind_cmd->add_option("--checkpoint", ind_checkpoint, "Trained checkpoint")->required();
  ind_cmd->add_option("--scenario", ind_scenario, "Scenario CSV file")->required();
  ind_cmd->add_option("--noise-seed", noise_seed, "Seed for reaction/deceleration noise");

  auto* eval_cmd = app.add_subcommand("evaluate", "EMV passing time for RL and benchmark");
  add_common(eval_cmd, eval_o);
  std::string eval_checkpoint, eval_scenario;
  int eval_runs = 1;
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Trained checkpoint (enables RL)");
  eval_cmd->add_option("--scenario", eval_scenario, "Scenario CSV (default: generated)");
  eval_cmd->add_option("--runs", eval_runs, "Number of seeded runs")->check(CLI::PositiveNumber);

  auto* sweep_cmd = app.add_subcommand("sweep", "Density x background-speed sensitivity sweep");
  add_common(sweep_cmd, sweep_o);
  std::string sweep_checkpoint;
  std::optional<int> jobs, runs;
  sweep_cmd->add_option("--checkpoint", sweep_checkpoint, "Trained checkpoint");
  sweep_cmd->add_option("--jobs", jobs, "Parallel sweep cells")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--runs", runs, "Runs per cell")->check(CLI::PositiveNumber);

  auto* gen_cmd = app.add_subcommand("gen-scenario", "Write a random initial scenario");
  add_common(gen_cmd, gen_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_o, episodes, variant, quiet);
    if (*ind_cmd) return cmd_indicator(ind_o, ind_checkpoint, ind_scenario, noise_seed);
    if (*eval_cmd) return cmd_evaluate(eval_o, eval_checkpoint, eval_scenario, eval_runs);
    if (*sweep_cmd) return cmd_sweep(sweep_o, sweep_checkpoint, jobs, runs);
    if (*gen_cmd) return cmd_gen_scenario(gen_o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
