#include "inrd/agent.hpp"

#include <json.hpp>

#include <algorithm>
#include <stdexcept>

#include "inrd/io.hpp"
#include "inrd/seeding.hpp"

namespace inrd {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  entries_.reserve(capacity);
}

void ReplayBuffer::push(Transition t) {
  if (entries_.size() < capacity_) {
    entries_.push_back(std::move(t));
  } else {
    entries_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, std::mt19937_64& rng) const {
  if (entries_.empty()) throw std::logic_error("ReplayBuffer: sampling from empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, entries_.size() - 1);
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("TrainConfig: gamma must be in (0,1)");
  if (!(alpha > 0.0)) throw std::invalid_argument("TrainConfig: alpha must be positive");
  if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_end < 0.0 || epsilon_end > 1.0)
    throw std::invalid_argument("TrainConfig: epsilon schedule must lie in [0,1]");
  if (epsilon_decay_steps <= 0 || target_sync_every <= 0 || batch_size <= 0 || train_every <= 0 ||
      eval_every <= 0 || eval_episodes <= 0)
    throw std::invalid_argument("TrainConfig: counts must be positive");
  if (total_steps < 0 || learning_starts < 0)
    throw std::invalid_argument("TrainConfig: total_steps/learning_starts must be nonnegative");
  if (buffer_capacity == 0) throw std::invalid_argument("TrainConfig: buffer capacity must be positive");
  if (!(huber_delta > 0.0) || !(grad_clip > 0.0))
    throw std::invalid_argument("TrainConfig: huber_delta and grad_clip must be positive");
}

std::string train_config_json(const TrainConfig& c) {
  nlohmann::json j;
  j["gamma"] = c.gamma;
  j["alpha"] = c.alpha;
  j["epsilon_start"] = c.epsilon_start;
  j["epsilon_end"] = c.epsilon_end;
  j["epsilon_decay_steps"] = c.epsilon_decay_steps;
  j["target_sync_every"] = c.target_sync_every;
  j["batch_size"] = c.batch_size;
  j["total_steps"] = c.total_steps;
  j["seed"] = c.seed;
  j["buffer_capacity"] = c.buffer_capacity;
  j["learning_starts"] = c.learning_starts;
  j["train_every"] = c.train_every;
  j["hidden_dims"] = c.hidden_dims;
  j["activation"] = to_string(c.activation);
  j["huber_delta"] = c.huber_delta;
  j["grad_clip"] = c.grad_clip;
  j["eval_every"] = c.eval_every;
  j["eval_episodes"] = c.eval_episodes;
  return j.dump(2) + "\n";
}

TrainConfig train_config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  TrainConfig c;
  c.gamma = j.value("gamma", c.gamma);
  c.alpha = j.value("alpha", c.alpha);
  c.epsilon_start = j.value("epsilon_start", c.epsilon_start);
  c.epsilon_end = j.value("epsilon_end", c.epsilon_end);
  c.epsilon_decay_steps = j.value("epsilon_decay_steps", c.epsilon_decay_steps);
  c.target_sync_every = j.value("target_sync_every", c.target_sync_every);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.seed = j.value("seed", c.seed);
  c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
  c.learning_starts = j.value("learning_starts", c.learning_starts);
  c.train_every = j.value("train_every", c.train_every);
  c.hidden_dims = j.value("hidden_dims", c.hidden_dims);
  if (j.contains("activation")) c.activation = activation_from_string(j["activation"].get<std::string>());
  c.huber_delta = j.value("huber_delta", c.huber_delta);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
  c.validate();
  return c;
}

double q_target(double q_sa, double reward, double gamma, double max_next_q, double alpha) {
  return q_sa + alpha * (reward + gamma * max_next_q - q_sa);
}

double double_q_bootstrap(ConstVecView online_next_q, ConstVecView target_next_q) {
  require_same_size(online_next_q.size(), target_next_q.size(), "double_q_bootstrap");
  return target_next_q[argmax(online_next_q)];
}

namespace {

class Adam {
 public:
  Adam(const PolicyNet& net, double lr) : lr_(lr), m_(net.zero_grads()), v_(net.zero_grads()) {}

  void step(std::vector<DenseLayer>& params, const std::vector<DenseLayer>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      update(params[k].weight.data(), grads[k].weight.data(), m_[k].weight.data(), v_[k].weight.data(), c1, c2);
      update(params[k].bias, grads[k].bias, m_[k].bias, v_[k].bias, c1, c2);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  void update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
              std::vector<double>& v, double c1, double c2) const {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
  }

  double lr_;
  int t_ = 0;
  std::vector<DenseLayer> m_;
  std::vector<DenseLayer> v_;
};

double grads_norm(const std::vector<DenseLayer>& grads) {
  double s = 0.0;
  for (const auto& g : grads) {
    for (double v : g.weight.data()) s += v * v;
    for (double v : g.bias) s += v * v;
  }
  return std::sqrt(s);
}

void scale_grads(std::vector<DenseLayer>& grads, double k) {
  for (auto& g : grads) {
    for (double& v : g.weight.data()) v *= k;
    for (double& v : g.bias) v *= k;
  }
}

double huber_slope(double delta_td, double kappa) {
  return std::clamp(delta_td, -kappa, kappa);
}

double huber(double delta_td, double kappa) {
  const double a = std::abs(delta_td);
  return a <= kappa ? 0.5 * a * a : kappa * (a - 0.5 * kappa);
}

}  // namespace

TrainResult train(const GridSpec& spec, const TrainConfig& cfg) {
  cfg.validate();
  const GridWorld world(spec);

  std::vector<std::size_t> dims{world.obs_dim()};
  dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
  dims.push_back(kNumMoves);

  TrainResult result{PolicyNet::random(dims, cfg.activation, derive_seed(cfg.seed, {1})), {}, {}, 0.0};
  PolicyNet& online = result.net;
  PolicyNet target = online;
  PolicyNet best = online;
  double best_return = -std::numeric_limits<double>::infinity();

  Adam optimizer(online, cfg.alpha);
  ReplayBuffer buffer(cfg.buffer_capacity);
  std::mt19937_64 rng(derive_seed(cfg.seed, {2}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> random_move(0, kNumMoves - 1);
  const std::uint64_t eval_seed = derive_seed(cfg.seed, {3});

  auto snapshot = [&](int step) {
    const double ret = evaluate_greedy(online, spec, cfg.eval_episodes, eval_seed);
    result.snapshots.push_back({step, ret});
    if (ret >= best_return) {
      best_return = ret;
      best = online;
    }
  };

  std::size_t episode = 0;
  auto [state, obs] = world.reset(derive_seed(cfg.seed, {4, episode}));
  double episode_return = 0.0;
  auto grads = online.zero_grads();

  for (int t = 0; t < cfg.total_steps; ++t) {
    const double frac = std::min(1.0, static_cast<double>(t) / cfg.epsilon_decay_steps);
    const double eps = cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start);
    const int action = unit(rng) < eps ? random_move(rng)
                                       : static_cast<int>(greedy_action(online, obs));
    auto [next_state, tr] = world.step(std::move(state), action);
    episode_return += tr.reward;
    obs = tr.next_obs;
    const bool done = tr.done;
    buffer.push(std::move(tr));
    state = std::move(next_state);
    if (done) {
      result.episode_returns.push_back(episode_return);
      episode_return = 0.0;
      ++episode;
      std::tie(state, obs) = world.reset(derive_seed(cfg.seed, {4, episode}));
    }

    if (t >= cfg.learning_starts && t % cfg.train_every == 0) {
      for (auto& g : grads) {
        std::fill(g.weight.data().begin(), g.weight.data().end(), 0.0);
        std::fill(g.bias.begin(), g.bias.end(), 0.0);
      }
      const auto batch = buffer.sample_indices(static_cast<std::size_t>(cfg.batch_size), rng);
      double loss = 0.0;
      for (auto i : batch) {
        const Transition& sample = buffer.at(i);
        const ForwardTape tape = online.record(sample.obs);
        const double q_sa = tape.logits()[static_cast<std::size_t>(sample.action)];
        const double bootstrap =
            sample.done ? 0.0
                        : double_q_bootstrap(online.forward(sample.next_obs), target.forward(sample.next_obs));
        const double y = q_target(q_sa, sample.reward, cfg.gamma, bootstrap, 1.0);
        const double td = q_sa - y;
        loss += huber(td, cfg.huber_delta);
        Vec64 dlogits(online.num_actions(), 0.0);
        dlogits[static_cast<std::size_t>(sample.action)] =
            huber_slope(td, cfg.huber_delta) / static_cast<double>(batch.size());
        online.backward(tape, dlogits, &grads, false);
      }
      if (!std::isfinite(loss))
        throw std::runtime_error("train: loss became non-finite at step " + std::to_string(t));
      const double gn = grads_norm(grads);
      if (gn > cfg.grad_clip) scale_grads(grads, cfg.grad_clip / gn);
      optimizer.step(online.mutable_layers(), grads);
    }

    if ((t + 1) % cfg.target_sync_every == 0) target = online;
    if ((t + 1) % cfg.eval_every == 0) snapshot(t + 1);
  }
  if (cfg.total_steps == 0 || cfg.total_steps % cfg.eval_every != 0) snapshot(cfg.total_steps);

  result.net = best;
  result.final_eval_return = best_return;
  return result;
}

std::uint64_t episode_seed(std::uint64_t seed, std::size_t episode) {
  return derive_seed(seed, {0xE915ULL, episode});
}

EpisodeLog run_episode(const GridWorld& world, std::uint64_t seed, const PolicyFn& policy) {
  EpisodeLog log;
  auto [state, obs] = world.reset(seed);
  while (!state.done) {
    const int action = policy(obs, static_cast<int>(log.actions.size()));
    log.observations.push_back(obs);
    auto [next, tr] = world.step(std::move(state), action);
    log.actions.push_back(action);
    log.rewards.push_back(tr.reward);
    log.total_return += tr.reward;
    if (tr.done && tr.reward == kGoalReward) log.reached_goal = true;
    obs = tr.next_obs;
    state = std::move(next);
  }
  return log;
}

double evaluate_greedy(const PolicyNet& net, const GridSpec& spec, int episodes, std::uint64_t seed) {
  if (episodes <= 0) return 0.0;
  const GridWorld world(spec);
  CompensatedSum total;
  for (int e = 0; e < episodes; ++e) {
    const auto log = run_episode(world, episode_seed(seed, static_cast<std::size_t>(e)),
                                 [&](const Vec64& o, int) { return static_cast<int>(greedy_action(net, o)); });
    total.add(log.total_return);
  }
  return total.value() / episodes;
}

double evaluate_random(const GridSpec& spec, int episodes, std::uint64_t seed) {
  if (episodes <= 0) return 0.0;
  const GridWorld world(spec);
  CompensatedSum total;
  for (int e = 0; e < episodes; ++e) {
    std::mt19937_64 rng(derive_seed(seed, {0xA11ULL, static_cast<std::uint64_t>(e)}));
    std::uniform_int_distribution<int> move(0, kNumMoves - 1);
    const auto log = run_episode(world, episode_seed(seed, static_cast<std::size_t>(e)),
                                 [&](const Vec64&, int) { return move(rng); });
    total.add(log.total_return);
  }
  return total.value() / episodes;
}

std::vector<StateRecord> base_rollout(const PolicyNet& net, const GridSpec& spec, int episodes,
                                      std::uint64_t seed) {
  std::vector<StateRecord> out;
  const GridWorld world(spec);
  for (int e = 0; e < episodes; ++e) {
    auto log = run_episode(world, episode_seed(seed, static_cast<std::size_t>(e)),
                           [&](const Vec64& o, int) { return static_cast<int>(greedy_action(net, o)); });
    for (std::size_t k = 0; k < log.observations.size(); ++k)
      out.push_back({e, static_cast<int>(k), std::move(log.observations[k])});
  }
  return out;
}

std::string state_record_json(const StateRecord& r) {
  nlohmann::json j;
  j["episode"] = r.episode;
  j["step"] = r.step;
  j["obs"] = r.obs;
  return j.dump();
}

StateRecord state_record_from_json(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  StateRecord r;
  r.episode = j.value("episode", 0);
  r.step = j.value("step", 0);
  if (j.contains("obs"))
    r.obs = j["obs"].get<Vec64>();
  else if (j.contains("s_adv"))
    r.obs = j["s_adv"].get<Vec64>();
  else
    throw std::runtime_error("state record has neither 'obs' nor 's_adv'");
  return r;
}

void write_state_records(const std::filesystem::path& path, const std::vector<StateRecord>& records) {
  std::string out;
  for (const auto& r : records) out += state_record_json(r) + "\n";
  write_text_file(path, out);
}

std::vector<StateRecord> read_state_records(const std::filesystem::path& path) {
  std::vector<StateRecord> out;
  for (const auto& line : read_lines(path)) out.push_back(state_record_from_json(line));
  return out;
}

}  // namespace inrd
