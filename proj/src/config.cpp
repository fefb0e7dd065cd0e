#include "dqjl/config.hpp"

#include <json.hpp>
#include <set>

#include "dqjl/errors.hpp"
#include "dqjl/table.hpp"

namespace dqjl {

using nlohmann::json;

namespace {

/// Reads known keys of one section and rejects the rest.
class Section {
 public:
  Section(const json& root, std::string name) : name_(std::move(name)) {
    if (!root.contains(name_)) return;
    node_ = &root.at(name_);
    if (!node_->is_object()) throw ConfigError("section '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& field) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    try {
      field = node_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& field) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    const auto& v = node_->at(key);
    if (v.is_null()) {
      field.reset();
      return;
    }
    try {
      field = v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    if (!node_) return;
    for (const auto& item : node_->items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError("unknown key '" + name_ + "." + item.key() + "'");
      }
    }
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> seen_;
};

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

void RunConfig::apply_master_seed() {
  train.seed = seed;
  sweep.seed = seed;
  scenario.seed = seed;
}

RunConfig default_run_config() {
  RunConfig config;
  config.scenario.spacing_m_per_veh = 12.5;
  return config;
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");
  static const std::set<std::string> kSections = {"road", "scenario", "train", "emv",
                                                  "sweep", "seed", "output_dir"};
  for (const auto& item : root.items()) {
    if (!kSections.count(item.key())) throw ConfigError("unknown section '" + item.key() + "'");
  }

  RunConfig c = default_run_config();
  {
    Section s(root, "road");
    auto& r = c.road;
    s.get("segment_length_m", r.segment_length_m);
    s.get("min_gap_m", r.min_gap_m);
    s.get("dt_s", r.dt_s);
    s.get("pad_size", r.pad_size);
    s.get("background_speed_mps", r.background_speed_mps);
    s.get("mean_reaction_s", r.mean_reaction_s);
    s.get("sigma_pullover", r.sigma_pullover);
    s.get("sigma_brake", r.sigma_brake);
    s.get("collision_reward", r.collision_reward);
    s.get("emv_max_speed_mps", r.emv_max_speed_mps);
    s.finish();
  }
  {
    Section s(root, "scenario");
    auto& sc = c.scenario;
    s.get_optional("n_vehicles", sc.n_vehicles);
    s.get_optional("spacing_m_per_veh", sc.spacing_m_per_veh);
    s.get_optional("n_vehicles_min", sc.n_vehicles_min);
    s.get("length_min_m", sc.length_min_m);
    s.get("length_max_m", sc.length_max_m);
    s.get("decel_mean_mps2", sc.decel_mean_mps2);
    s.get("decel_std_mps2", sc.decel_std_mps2);
    s.get("decel_min_mps2", sc.decel_min_mps2);
    s.get("decel_max_mps2", sc.decel_max_mps2);
    s.get("lane_split", sc.lane_split);
    s.finish();
  }
  {
    Section s(root, "train");
    auto& t = c.train;
    std::string variant(to_string(t.variant));
    s.get("variant", variant);
    t.variant = parse_variant(variant);
    s.get("gamma", t.gamma);
    s.get("learning_rate", t.learning_rate);
    s.get("batch_size", t.batch_size);
    s.get("eps_start", t.eps_start);
    s.get("eps_end", t.eps_end);
    s.get("eps_decay_steps", t.eps_decay_steps);
    s.get("target_sync_steps", t.target_sync_steps);
    s.get("replay_capacity", t.replay_capacity);
    s.get("episodes", t.episodes);
    s.get("hidden1", t.hidden1);
    s.get("hidden2", t.hidden2);
    s.get("max_grad_norm", t.max_grad_norm);
    s.finish();
  }
  {
    Section s(root, "emv");
    s.get("length_m", c.emv.length_m);
    s.get("trigger_m", c.emv.trigger_m);
    s.get("max_time_s", c.emv.max_time_s);
    s.finish();
  }
  {
    Section s(root, "sweep");
    s.get("spacings_m_per_veh", c.sweep.spacings_m_per_veh);
    s.get("speeds_mps", c.sweep.speeds_mps);
    s.get("runs_per_cell", c.sweep.runs_per_cell);
    s.get("include_rl", c.sweep.include_rl);
    s.get("include_benchmark", c.sweep.include_benchmark);
    s.get("jobs", c.sweep.jobs);
    s.finish();
  }
  try {
    if (root.contains("seed")) c.seed = root.at("seed").get<std::uint64_t>();
    if (root.contains("output_dir")) c.output_dir = root.at("output_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
  c.apply_master_seed();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path));
}

std::string run_config_to_json(const RunConfig& c) {
  json root;
  const auto& r = c.road;
  root["road"] = {{"segment_length_m", r.segment_length_m},
                  {"min_gap_m", r.min_gap_m},
                  {"dt_s", r.dt_s},
                  {"pad_size", r.pad_size},
                  {"background_speed_mps", r.background_speed_mps},
                  {"mean_reaction_s", r.mean_reaction_s},
                  {"sigma_pullover", r.sigma_pullover},
                  {"sigma_brake", r.sigma_brake},
                  {"collision_reward", r.collision_reward},
                  {"emv_max_speed_mps", r.emv_max_speed_mps}};
  const auto& sc = c.scenario;
  root["scenario"] = {{"n_vehicles", optional_json(sc.n_vehicles)},
                      {"spacing_m_per_veh", optional_json(sc.spacing_m_per_veh)},
                      {"n_vehicles_min", optional_json(sc.n_vehicles_min)},
                      {"length_min_m", sc.length_min_m},
                      {"length_max_m", sc.length_max_m},
                      {"decel_mean_mps2", sc.decel_mean_mps2},
                      {"decel_std_mps2", sc.decel_std_mps2},
                      {"decel_min_mps2", sc.decel_min_mps2},
                      {"decel_max_mps2", sc.decel_max_mps2},
                      {"lane_split", sc.lane_split}};
  const auto& t = c.train;
  root["train"] = {{"variant", std::string(to_string(t.variant))},
                   {"gamma", t.gamma},
                   {"learning_rate", t.learning_rate},
                   {"batch_size", t.batch_size},
                   {"eps_start", t.eps_start},
                   {"eps_end", t.eps_end},
                   {"eps_decay_steps", t.eps_decay_steps},
                   {"target_sync_steps", t.target_sync_steps},
                   {"replay_capacity", t.replay_capacity},
                   {"episodes", t.episodes},
                   {"hidden1", t.hidden1},
                   {"hidden2", t.hidden2},
                   {"max_grad_norm", t.max_grad_norm}};
  root["emv"] = {{"length_m", c.emv.length_m},
                 {"trigger_m", c.emv.trigger_m},
                 {"max_time_s", c.emv.max_time_s}};
  root["sweep"] = {{"spacings_m_per_veh", c.sweep.spacings_m_per_veh},
                   {"speeds_mps", c.sweep.speeds_mps},
                   {"runs_per_cell", c.sweep.runs_per_cell},
                   {"include_rl", c.sweep.include_rl},
                   {"include_benchmark", c.sweep.include_benchmark},
                   {"jobs", c.sweep.jobs}};
  root["seed"] = c.seed;
  root["output_dir"] = c.output_dir;
  return root.dump(2) + "\n";
}

}  // namespace dqjl
