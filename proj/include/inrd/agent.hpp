#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "inrd/gridworld.hpp"
#include "inrd/policy_net.hpp"

namespace inrd {

/// Fixed-capacity ring of transitions with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  /// `count` indices drawn uniformly with replacement over current contents.
  std::vector<std::size_t> sample_indices(std::size_t count, std::mt19937_64& rng) const;
  const Transition& at(std::size_t i) const { return entries_.at(i); }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> entries_;
};

struct TrainConfig {
  double gamma = 0.99;
  double alpha = 1e-3;  // Adam learning rate
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  int epsilon_decay_steps = 20000;
  int target_sync_every = 500;
  int batch_size = 64;
  int total_steps = 50000;
  std::uint64_t seed = 0;
  std::size_t buffer_capacity = 10000;
  int learning_starts = 1000;
  int train_every = 1;
  std::vector<std::size_t> hidden_dims{64, 64};
  Activation activation = Activation::tanh;
  double huber_delta = 1.0;
  double grad_clip = 10.0;
  int eval_every = 5000;
  int eval_episodes = 20;

  void validate() const;
};

std::string train_config_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

/// One-step Q-learning update: q + α·(r + γ·max_next_q − q). Callers pass
/// max_next_q = 0 for terminal transitions.
double q_target(double q_sa, double reward, double gamma, double max_next_q, double alpha);

/// Double-Q bootstrap value: action chosen by the online net, valued by the target net.
double double_q_bootstrap(ConstVecView online_next_q, ConstVecView target_next_q);

struct EvalSnapshot {
  int step = 0;
  double mean_return = 0.0;
};

struct TrainResult {
  PolicyNet net;
  std::vector<double> episode_returns;
  std::vector<EvalSnapshot> snapshots;
  double final_eval_return = 0.0;
};

/// Double DQN with Huber TD loss, Adam and gradient-norm clipping. The returned net is
/// the best greedy-evaluation snapshot. Deterministic given cfg.seed.
TrainResult train(const GridSpec& spec, const TrainConfig& cfg);

struct EpisodeLog {
  std::vector<Vec64> observations;  // observation the agent acted on at each step
  std::vector<int> actions;
  std::vector<double> rewards;
  double total_return = 0.0;
  bool reached_goal = false;
};

/// Chooses an action for the observation at step `step`.
using PolicyFn = std::function<int(const Vec64& obs, int step)>;

EpisodeLog run_episode(const GridWorld& world, std::uint64_t seed, const PolicyFn& policy);

/// Seed of episode `episode` in a run seeded by `seed`.
std::uint64_t episode_seed(std::uint64_t seed, std::size_t episode);

/// Mean greedy return over `episodes` seeded episodes.
double evaluate_greedy(const PolicyNet& net, const GridSpec& spec, int episodes, std::uint64_t seed);
/// Mean return of the uniform-random policy.
double evaluate_random(const GridSpec& spec, int episodes, std::uint64_t seed);

inline std::size_t greedy_action(const PolicyNet& net, ConstVecView obs) {
  return argmax(net.forward(obs));
}

struct StateRecord {
  int episode = 0;
  int step = 0;
  Vec64 obs;
};

/// Observations visited by greedy (unperturbed) episodes, in order.
std::vector<StateRecord> base_rollout(const PolicyNet& net, const GridSpec& spec, int episodes,
                                      std::uint64_t seed);

std::string state_record_json(const StateRecord& r);
StateRecord state_record_from_json(const std::string& line);
void write_state_records(const std::filesystem::path& path, const std::vector<StateRecord>& records);
std::vector<StateRecord> read_state_records(const std::filesystem::path& path);

}  // namespace inrd
