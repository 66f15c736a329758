#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "inrd/linalg.hpp"

namespace inrd {

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

/// Desk-scale grid MDP. Observations are three stacked planes (agent, goal, hazards)
/// of width·height pixels each, plus clipped Gaussian pixel noise.
struct GridSpec {
  int width = 8;
  int height = 8;
  Cell start{0, 0};
  Cell goal{7, 7};
  std::vector<Cell> hazards{{2, 5}, {5, 2}, {4, 4}};
  double noise_sigma = 0.05;
  int max_steps = 100;

  static constexpr int kChannels = 3;
  /// Pixel intensities of an empty and an occupied cell. Kept away from the [0,1] clip
  /// bounds so pixel noise stays unbiased.
  static constexpr double kOffLevel = 0.2;
  static constexpr double kOnLevel = 0.8;

  std::size_t obs_dim() const { return static_cast<std::size_t>(width * height * kChannels); }
  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  bool is_hazard(Cell c) const;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

std::string grid_spec_json(const GridSpec& spec);
GridSpec grid_spec_from_json(const std::string& text);
GridSpec load_grid_spec(const std::filesystem::path& path);

enum class Move : int { up = 0, down = 1, left = 2, right = 3 };
inline constexpr int kNumMoves = 4;

struct EnvState {
  Cell agent;
  int step_count = 0;
  bool done = false;
  std::mt19937_64 rng;
  /// Observation rendered for the current cell.
  Vec64 obs;
};

struct Transition {
  Vec64 obs;
  int action = 0;
  double reward = 0.0;
  Vec64 next_obs;
  bool done = false;
};

inline constexpr double kGoalReward = 1.0;
inline constexpr double kHazardReward = -1.0;
inline constexpr double kStepReward = -0.01;

/// Pure-function interface over a fixed spec; EnvState carries all mutable state.
class GridWorld {
 public:
  explicit GridWorld(GridSpec spec);

  const GridSpec& spec() const noexcept { return spec_; }
  std::size_t obs_dim() const noexcept { return spec_.obs_dim(); }

  std::pair<EnvState, Vec64> reset(std::uint64_t seed) const;
  std::pair<EnvState, Transition> step(EnvState state, int action) const;

  /// Noiseless planes for a cell.
  Vec64 render_clean(Cell agent) const;
  /// Clean render plus N(0, σ²) pixel noise from the state's stream, clipped to [0,1].
  Vec64 render(EnvState& state) const;

 private:
  GridSpec spec_;
};

/// Shortest-path length (moves) from start to goal avoiding hazards; -1 if unreachable.
int shortest_path_length(const GridSpec& spec);

}  // namespace inrd
