#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "dqjl/env.hpp"
#include "dqjl/qnet.hpp"
#include "dqjl/scenario.hpp"
#include "dqjl/table.hpp"

namespace dqjl {

enum class Variant { Dqn, Ddqn, Dueling, D3qn };

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view text);
Architecture architecture_of(Variant variant);
/// True for variants that select the bootstrap action with the online net.
bool uses_double_q(Variant variant);

struct Experience {
  Eigen::VectorXd state;
  int action = ActionIndex::kNone;
  double reward = 0.0;
  Eigen::VectorXd next_state;
  ActionMask next_mask;
  bool done = false;
};

/// Bounded FIFO with oldest-first eviction and uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Experience e);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Experience& at(std::size_t i) const;  // 0 = oldest

  /// Distinct slot indices (into at()) drawn uniformly without replacement.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<Experience> items_;
};

struct TrainConfig {
  Variant variant = Variant::Ddqn;
  double gamma = 0.99;
  double learning_rate = 0.0005;
  int batch_size = 64;
  double eps_start = 1.0;
  double eps_end = 0.001;
  int eps_decay_steps = 10000;
  int target_sync_steps = 100;
  std::size_t replay_capacity = 100000;
  int episodes = 2000;
  std::uint64_t seed = 1;
  int hidden1 = kDefaultHidden1;
  int hidden2 = kDefaultHidden2;
  double max_grad_norm = 0.0;

  void validate() const;
};

/// Linear decay from eps_start at step 0 to eps_end at eps_decay_steps.
double epsilon(std::int64_t step, const TrainConfig& cfg);

/// Greedy action over valid entries of `q` (lowest index wins ties); with
/// probability eps a uniform choice among valid entries instead.
ActionIndex select_action(const Eigen::VectorXd& q_values, const ActionMask& mask,
                          double eps, Rng& rng);

/// argmax over valid entries, lowest index on ties. Returns an output index.
int masked_argmax(const Eigen::Ref<const Eigen::VectorXd>& q, const ActionMask& mask);

/// Bootstrapped regression targets for a minibatch.
Eigen::VectorXd compute_targets(std::span<const Experience* const> batch,
                                const QNetworkd& online, const QNetworkd& target,
                                Variant variant, double gamma);

struct EpisodeRecord {
  int episode = 0;
  double total_return = 0.0;
  int steps = 0;
  bool collided = false;
  bool established = false;
  double epsilon_at_end = 0.0;
  double mean_loss = 0.0;  // NaN-free: 0 when no gradient step happened
};

struct TrainReport {
  std::vector<EpisodeRecord> episodes;
  QNetworkd online;
  QNetworkd target;
  std::int64_t env_steps = 0;
  std::int64_t gradient_steps = 0;
  std::int64_t target_syncs = 0;

  /// Columns: episode, return, steps, collided, established, epsilon_at_end,
  /// mean_loss.
  CsvTable to_table() const;
};

/// Hooks for tests and progress reporting; all optional.
struct TrainHooks {
  std::function<void(const EpisodeRecord&)> on_episode;
  /// Called after each gradient step with the online and target nets.
  std::function<void(std::int64_t gradient_step, const QNetworkd& online,
                     const QNetworkd& target, bool synced)>
      on_gradient_step;
  /// Called for every stored transition.
  std::function<void(const Experience&, const ActionMask& state_mask)> on_experience;
};

/// Independent generator streams derived from one master seed.
struct TrainStreams {
  Rng init, scenario, noise, explore, replay;
  explicit TrainStreams(std::uint64_t seed);
};

/// Fixed-target deep Q-learning over freshly generated scenarios, one gradient
/// step per environment step once the buffer holds a full minibatch.
TrainReport train(const TrainConfig& cfg, const RoadConfig& road,
                  const ScenarioSpec& scenario, const TrainHooks& hooks = {});

}  // namespace dqjl
