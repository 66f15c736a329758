#include "inrd/gridworld.hpp"

#include <json.hpp>

#include <algorithm>
#include <deque>
#include <stdexcept>

#include "inrd/io.hpp"

namespace inrd {

bool GridSpec::is_hazard(Cell c) const {
  return std::find(hazards.begin(), hazards.end(), c) != hazards.end();
}

void GridSpec::validate() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("GridSpec: width/height must be positive");
  if (max_steps <= 0) throw std::invalid_argument("GridSpec: max_steps must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw std::invalid_argument("GridSpec: noise_sigma must be a nonnegative real");
  if (!in_bounds(start)) throw std::invalid_argument("GridSpec: start out of bounds");
  if (!in_bounds(goal)) throw std::invalid_argument("GridSpec: goal out of bounds");
  if (start == goal) throw std::invalid_argument("GridSpec: start equals goal");
  for (const auto& h : hazards) {
    if (!in_bounds(h)) throw std::invalid_argument("GridSpec: hazard out of bounds");
    if (h == start || h == goal) throw std::invalid_argument("GridSpec: hazard on start or goal");
  }
}

namespace {

nlohmann::json cell_json(Cell c) { return nlohmann::json::array({c.x, c.y}); }
Cell cell_from(const nlohmann::json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

}  // namespace

std::string grid_spec_json(const GridSpec& spec) {
  nlohmann::json j;
  j["width"] = spec.width;
  j["height"] = spec.height;
  j["start"] = cell_json(spec.start);
  j["goal"] = cell_json(spec.goal);
  auto hz = nlohmann::json::array();
  for (const auto& h : spec.hazards) hz.push_back(cell_json(h));
  j["hazards"] = hz;
  j["obs_dim"] = spec.obs_dim();
  j["noise_sigma"] = spec.noise_sigma;
  j["max_steps"] = spec.max_steps;
  return j.dump(2) + "\n";
}

GridSpec grid_spec_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  GridSpec spec;
  spec.width = j.value("width", spec.width);
  spec.height = j.value("height", spec.height);
  if (j.contains("start")) spec.start = cell_from(j["start"]);
  if (j.contains("goal")) spec.goal = cell_from(j["goal"]);
  if (j.contains("hazards")) {
    spec.hazards.clear();
    for (const auto& h : j["hazards"]) spec.hazards.push_back(cell_from(h));
  }
  spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
  spec.max_steps = j.value("max_steps", spec.max_steps);
  if (j.contains("obs_dim") && j["obs_dim"].get<std::size_t>() != spec.obs_dim())
    throw std::invalid_argument("GridSpec: obs_dim inconsistent with width*height*3");
  spec.validate();
  return spec;
}

GridSpec load_grid_spec(const std::filesystem::path& path) {
  return grid_spec_from_json(read_text_file(path));
}

GridWorld::GridWorld(GridSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

Vec64 GridWorld::render_clean(Cell agent) const {
  const auto plane = static_cast<std::size_t>(spec_.width * spec_.height);
  Vec64 obs(spec_.obs_dim(), GridSpec::kOffLevel);
  auto pixel = [&](std::size_t channel, Cell c) -> double& {
    return obs[channel * plane + static_cast<std::size_t>(c.y * spec_.width + c.x)];
  };
  pixel(0, agent) = GridSpec::kOnLevel;
  pixel(1, spec_.goal) = GridSpec::kOnLevel;
  for (const auto& h : spec_.hazards) pixel(2, h) = GridSpec::kOnLevel;
  return obs;
}

Vec64 GridWorld::render(EnvState& state) const {
  Vec64 obs = render_clean(state.agent);
  if (spec_.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, spec_.noise_sigma);
    for (double& v : obs) v = std::clamp(v + noise(state.rng), 0.0, 1.0);
  }
  return obs;
}

std::pair<EnvState, Vec64> GridWorld::reset(std::uint64_t seed) const {
  EnvState state;
  state.agent = spec_.start;
  state.rng.seed(seed);
  state.obs = render(state);
  Vec64 obs = state.obs;
  return {std::move(state), std::move(obs)};
}

std::pair<EnvState, Transition> GridWorld::step(EnvState state, int action) const {
  if (action < 0 || action >= kNumMoves)
    throw std::out_of_range("GridWorld::step: action " + std::to_string(action) + " not in 0..3");
  if (state.done) throw std::logic_error("GridWorld::step: episode already finished");

  Transition tr;
  tr.obs = state.obs;
  tr.action = action;

  Cell next = state.agent;
  switch (static_cast<Move>(action)) {
    case Move::up: --next.y; break;
    case Move::down: ++next.y; break;
    case Move::left: --next.x; break;
    case Move::right: ++next.x; break;
  }
  if (spec_.in_bounds(next)) state.agent = next;
  ++state.step_count;

  if (state.agent == spec_.goal) {
    tr.reward = kGoalReward;
    state.done = true;
  } else if (spec_.is_hazard(state.agent)) {
    tr.reward = kHazardReward;
    state.done = true;
  } else {
    tr.reward = kStepReward;
    state.done = state.step_count >= spec_.max_steps;
  }
  state.obs = render(state);
  tr.next_obs = state.obs;
  tr.done = state.done;
  return {std::move(state), std::move(tr)};
}

int shortest_path_length(const GridSpec& spec) {
  std::vector<int> dist(static_cast<std::size_t>(spec.width * spec.height), -1);
  auto idx = [&](Cell c) { return static_cast<std::size_t>(c.y * spec.width + c.x); };
  std::deque<Cell> queue{spec.start};
  dist[idx(spec.start)] = 0;
  const Cell deltas[] = {{0, -1}, {0, 1}, {-1, 0}, {1, 0}};
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    if (c == spec.goal) return dist[idx(c)];
    for (const auto& d : deltas) {
      const Cell n{c.x + d.x, c.y + d.y};
      if (!spec.in_bounds(n) || spec.is_hazard(n) || dist[idx(n)] >= 0) continue;
      dist[idx(n)] = dist[idx(c)] + 1;
      queue.push_back(n);
    }
  }
  return -1;
}

}  // namespace inrd
