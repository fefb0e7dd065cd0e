#include "dqjl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "dqjl/errors.hpp"

namespace dqjl {

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::Dqn: return "dqn";
    case Variant::Ddqn: return "ddqn";
    case Variant::Dueling: return "dueling";
    case Variant::D3qn: return "d3qn";
  }
  return "dqn";
}

Variant parse_variant(std::string_view text) {
  if (text == "dqn") return Variant::Dqn;
  if (text == "ddqn") return Variant::Ddqn;
  if (text == "dueling") return Variant::Dueling;
  if (text == "d3qn" || text == "3dqn") return Variant::D3qn;
  throw ConfigError("unknown variant '" + std::string(text) +
                    "' (expected dqn, ddqn, dueling or d3qn)");
}

Architecture architecture_of(Variant variant) {
  return variant == Variant::Dueling || variant == Variant::D3qn ? Architecture::Dueling
                                                                 : Architecture::Standard;
}

bool uses_double_q(Variant variant) {
  return variant == Variant::Ddqn || variant == Variant::D3qn;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(Experience e) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(e));
    return;
  }
  items_[head_] = std::move(e);
  head_ = (head_ + 1) % capacity_;
}

const Experience& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("replay index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
  if (count > items_.size()) throw ConfigError("minibatch larger than replay contents");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> out;
  out.reserve(count);
  std::unordered_set<std::size_t> seen;
  while (out.size() < count) {
    const auto i = pick(rng);
    if (seen.insert(i).second) out.push_back(i);
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(eps_end <= eps_start) || eps_end < 0.0 || eps_start > 1.0) {
    throw ConfigError("need 0 <= eps_end <= eps_start <= 1");
  }
  if (eps_decay_steps < 1) throw ConfigError("eps_decay_steps must be >= 1");
  if (target_sync_steps < 1) throw ConfigError("target_sync_steps must be >= 1");
  if (replay_capacity < static_cast<std::size_t>(batch_size)) {
    throw ConfigError("replay capacity smaller than batch size");
  }
  if (episodes < 0) throw ConfigError("episodes must be >= 0");
  if (hidden1 < 1 || hidden2 < 1) throw ConfigError("hidden sizes must be >= 1");
  if (max_grad_norm < 0.0) throw ConfigError("max_grad_norm must be >= 0");
}

double epsilon(std::int64_t step, const TrainConfig& cfg) {
  if (step >= cfg.eps_decay_steps) return cfg.eps_end;
  const double frac = static_cast<double>(step) / static_cast<double>(cfg.eps_decay_steps);
  return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac;
}

int masked_argmax(const Eigen::Ref<const Eigen::VectorXd>& q, const ActionMask& mask) {
  int best = -1;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    if (best < 0 || q(i) > q(best)) best = static_cast<int>(i);
  }
  if (best < 0) throw InvalidActionError("no valid action in mask");
  return best;
}

ActionIndex select_action(const Eigen::VectorXd& q_values, const ActionMask& mask,
                          double eps, Rng& rng) {
  if (static_cast<std::size_t>(q_values.size()) != mask.size()) {
    throw ShapeError("q-values and action mask differ in size");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < eps) {
    std::vector<int> valid;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) valid.push_back(static_cast<int>(i));
    }
    if (valid.empty()) throw InvalidActionError("no valid action in mask");
    std::uniform_int_distribution<std::size_t> pick(0, valid.size() - 1);
    return ActionIndex::from_output_index(valid[pick(rng)]);
  }
  return ActionIndex::from_output_index(masked_argmax(q_values, mask));
}

Eigen::VectorXd compute_targets(std::span<const Experience* const> batch,
                                const QNetworkd& online, const QNetworkd& target,
                                Variant variant, double gamma) {
  if (batch.empty()) throw ConfigError("empty minibatch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd next(online.input_size(), n);
  for (Eigen::Index b = 0; b < n; ++b) next.col(b) = batch[static_cast<std::size_t>(b)]->next_state;

  const Eigen::MatrixXd q_target = forward_batch(target, next);
  Eigen::MatrixXd q_online;
  if (uses_double_q(variant)) q_online = forward_batch(online, next);

  Eigen::VectorXd y(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto& e = *batch[static_cast<std::size_t>(b)];
    if (e.done) {
      y(b) = e.reward;
      continue;
    }
    const int a = uses_double_q(variant) ? masked_argmax(q_online.col(b), e.next_mask)
                                         : masked_argmax(q_target.col(b), e.next_mask);
    y(b) = e.reward + gamma * q_target(a, b);
  }
  return y;
}

CsvTable TrainReport::to_table() const {
  CsvTable table;
  table.header = {"episode", "return", "steps", "collided", "established",
                  "epsilon_at_end", "mean_loss"};
  for (const auto& e : episodes) {
    table.add_row({std::to_string(e.episode), format_exact(e.total_return),
                   std::to_string(e.steps), e.collided ? "1" : "0",
                   e.established ? "1" : "0", format_exact(e.epsilon_at_end),
                   format_exact(e.mean_loss)});
  }
  return table;
}

namespace {

Rng stream(std::uint64_t seed, std::uint32_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    id};
  return Rng(seq);
}

}  // namespace

TrainStreams::TrainStreams(std::uint64_t seed)
    : init(stream(seed, 1)),
      scenario(stream(seed, 2)),
      noise(stream(seed, 3)),
      explore(stream(seed, 4)),
      replay(stream(seed, 5)) {}

TrainReport train(const TrainConfig& cfg, const RoadConfig& road,
                  const ScenarioSpec& scenario, const TrainHooks& hooks) {
  cfg.validate();
  road.validate();
  TrainStreams rng(cfg.seed);

  TrainReport report;
  report.online = make_qnetwork<double>(architecture_of(cfg.variant), road.pad_size,
                                        rng.init, cfg.hidden1, cfg.hidden2);
  report.target = report.online;
  auto& online = report.online;
  auto& target = report.target;

  const AdamConfig adam{cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.max_grad_norm};
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  ReplayBuffer buffer(cfg.replay_capacity);
  const int cap = road.step_cap();

  Eigen::MatrixXd inputs(online.input_size(), cfg.batch_size);
  std::vector<int> actions(batch_size);
  std::vector<const Experience*> batch(batch_size);

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    PaddedState state = generate_scenario(scenario, road, rng.scenario);
    EpisodeRecord record;
    record.episode = ep;
    double loss_sum = 0.0;
    int loss_count = 0;
    record.established = upper_lane_occupancy(state, road.segment_length_m) == 0;

    while (!record.established && !record.collided && record.steps < cap) {
      const Eigen::VectorXd features = network_features(state, road);
      const ActionMask mask = valid_action_mask(state, road);
      const double eps = epsilon(report.env_steps, cfg);
      const ActionIndex action = select_action(forward(online, features), mask, eps, rng.explore);
      StepOutcome out = step(state, action, road, rng.noise);
      ++record.steps;
      ++report.env_steps;
      record.total_return += out.reward;
      record.collided = out.collided;
      record.established = out.dqjl_established;
      record.epsilon_at_end = eps;

      Experience e{features, action.output_index(), out.reward,
                   network_features(out.next_state, road),
                   valid_action_mask(out.next_state, road), out.done};
      if (hooks.on_experience) hooks.on_experience(e, mask);
      buffer.push(std::move(e));
      state = std::move(out.next_state);

      if (buffer.size() < batch_size) continue;
      const auto picks = buffer.sample_indices(batch_size, rng.replay);
      for (std::size_t b = 0; b < batch_size; ++b) {
        batch[b] = &buffer.at(picks[b]);
        inputs.col(static_cast<Eigen::Index>(b)) = batch[b]->state;
        actions[b] = batch[b]->action;
      }
      const Eigen::VectorXd y = compute_targets(batch, online, target, cfg.variant, cfg.gamma);
      BatchLoss loss;
      const auto grads = backward_batch(online, inputs, actions, y, &loss);
      if (!std::isfinite(loss.mean_squared_error)) {
        throw NumericError("non-finite loss at episode " + std::to_string(ep) +
                           ", gradient step " + std::to_string(report.gradient_steps + 1));
      }
      adam_step(online, grads, adam);
      ++report.gradient_steps;
      loss_sum += loss.mean_squared_error;
      ++loss_count;
      const bool sync = report.gradient_steps % cfg.target_sync_steps == 0;
      if (sync) {
        target.copy_weights_from(online);
        ++report.target_syncs;
      }
      if (hooks.on_gradient_step) {
        hooks.on_gradient_step(report.gradient_steps, online, target, sync);
      }
    }
    if (record.steps == 0) record.epsilon_at_end = epsilon(report.env_steps, cfg);
    record.mean_loss = loss_count ? loss_sum / loss_count : 0.0;
    report.episodes.push_back(record);
    if (hooks.on_episode) hooks.on_episode(record);
  }
  return report;
}

}  // namespace dqjl
