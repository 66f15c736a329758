#include <doctest.h>

#include <cmath>
#include <deque>

#include "inrd/gridworld.hpp"
#include "inrd/linalg.hpp"

using namespace inrd;

namespace {

GridSpec open_grid(int n) {
  GridSpec spec;
  spec.width = spec.height = n;
  spec.start = {0, 0};
  spec.goal = {n - 1, n - 1};
  spec.hazards.clear();
  spec.noise_sigma = 0.0;
  return spec;
}

// Breadth-first enumeration of move sequences, independent of the library's BFS.
std::vector<int> shortest_moves(const GridSpec& spec) {
  struct Node {
    Cell c;
    std::vector<int> path;
  };
  std::deque<Node> q{{spec.start, {}}};
  std::vector<bool> seen(static_cast<std::size_t>(spec.width * spec.height), false);
  seen[0] = true;
  const int dx[] = {0, 0, -1, 1}, dy[] = {-1, 1, 0, 0};
  while (!q.empty()) {
    Node n = q.front();
    q.pop_front();
    if (n.c == spec.goal) return n.path;
    for (int a = 0; a < 4; ++a) {
      Cell m{n.c.x + dx[a], n.c.y + dy[a]};
      if (!spec.in_bounds(m) || spec.is_hazard(m)) continue;
      auto idx = static_cast<std::size_t>(m.y * spec.width + m.x);
      if (seen[idx]) continue;
      seen[idx] = true;
      auto p = n.path;
      p.push_back(a);
      q.push_back({m, p});
    }
  }
  return {};
}

}  // namespace

TEST_CASE("reset is deterministic and clipped") {
  const GridWorld world(GridSpec{});
  const auto [s1, o1] = world.reset(7);
  const auto [s2, o2] = world.reset(7);
  CHECK(o1 == o2);
  CHECK(o1.size() == 192);
  for (double v : o1) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(s1.agent == GridSpec{}.start);
}

TEST_CASE("zero noise renders exactly") {
  GridSpec spec;
  spec.noise_sigma = 0.0;
  const GridWorld world(spec);
  const auto [s, o] = world.reset(3);
  CHECK(o == world.render_clean(spec.start));
}

TEST_CASE("invalid grid specs are rejected") {
  GridSpec spec;
  spec.goal = spec.start;
  CHECK_THROWS_AS(GridWorld{spec}, std::invalid_argument);
  GridSpec out;
  out.hazards.push_back({9, 9});
  CHECK_THROWS_AS(GridWorld{out}, std::invalid_argument);
}

TEST_CASE("moving onto the goal pays +1 and ends the episode") {
  GridSpec spec = open_grid(3);
  spec.start = {2, 1};
  const GridWorld world(spec);
  auto [s, o] = world.reset(0);
  auto [next, tr] = world.step(std::move(s), static_cast<int>(Move::down));
  CHECK(tr.reward == kGoalReward);
  CHECK(tr.done);
  CHECK(next.agent == spec.goal);
}

TEST_CASE("walls block and cost a step") {
  const GridWorld world(open_grid(4));
  auto [s, o] = world.reset(0);
  auto [next, tr] = world.step(std::move(s), static_cast<int>(Move::up));
  CHECK(next.agent == Cell{0, 0});
  CHECK(tr.reward == kStepReward);
  CHECK_FALSE(tr.done);
}

TEST_CASE("hazards end the episode with -1") {
  GridSpec spec = open_grid(4);
  spec.hazards = {{1, 0}};
  const GridWorld world(spec);
  auto [s, o] = world.reset(0);
  auto [next, tr] = world.step(std::move(s), static_cast<int>(Move::right));
  CHECK(tr.reward == kHazardReward);
  CHECK(tr.done);
}

TEST_CASE("out-of-range actions throw") {
  const GridWorld world(GridSpec{});
  auto [s, o] = world.reset(0);
  CHECK_THROWS_AS(world.step(s, 4), std::out_of_range);
  CHECK_THROWS_AS(world.step(s, -1), std::out_of_range);
}

TEST_CASE("shortest-path return on a 5x5 open grid") {
  const GridSpec spec = open_grid(5);
  const auto moves = shortest_moves(spec);
  REQUIRE(moves.size() == 8);
  CHECK(shortest_path_length(spec) == 8);
  const GridWorld world(spec);
  auto [s, o] = world.reset(1);
  double ret = 0.0;
  bool done = false;
  for (int a : moves) {
    auto [n, tr] = world.step(std::move(s), a);
    ret += tr.reward;
    done = tr.done;
    s = std::move(n);
  }
  CHECK(done);
  CHECK(ret == doctest::Approx(1.0 - 0.01 * (moves.size() - 1)).epsilon(1e-12));
}

TEST_CASE("default grid: shortest path 14, optimal return 0.87") {
  const GridSpec spec;
  const auto moves = shortest_moves(spec);
  CHECK(moves.size() == 14);
  CHECK(shortest_path_length(spec) == 14);
}

TEST_CASE("episodes terminate within max_steps") {
  GridSpec spec;
  spec.max_steps = 25;
  const GridWorld world(spec);
  auto [s, o] = world.reset(5);
  int steps = 0;
  bool done = false;
  while (!done) {
    auto [n, tr] = world.step(std::move(s), steps % 2 == 0 ? static_cast<int>(Move::up) : static_cast<int>(Move::left));
    done = tr.done;
    s = std::move(n);
    ++steps;
    REQUIRE(steps <= 25);
  }
  CHECK(steps == 25);
}

TEST_CASE("identical seed and actions give a bitwise identical trajectory") {
  const GridWorld world(GridSpec{});
  auto run = [&] {
    std::vector<Vec64> obs;
    auto [s, o] = world.reset(99);
    obs.push_back(o);
    const int actions[] = {3, 3, 1, 1, 3, 1, 0, 2, 1, 3};
    for (int a : actions) {
      auto [n, tr] = world.step(std::move(s), a);
      obs.push_back(tr.next_obs);
      s = std::move(n);
      if (tr.done) break;
    }
    return obs;
  };
  CHECK(run() == run());
}

TEST_CASE("noisy observations average to the clean render") {
  const GridSpec spec;
  const GridWorld world(spec);
  const Vec64 clean = world.render_clean(spec.start);
  const int draws = 10000;
  Vec64 mean(clean.size(), 0.0);
  for (int k = 0; k < draws; ++k) {
    const auto [s, o] = world.reset(static_cast<std::uint64_t>(k) + 1000);
    for (std::size_t i = 0; i < o.size(); ++i) mean[i] += o[i] / draws;
  }
  // 4.5 standard errors keeps the family-wise false alarm rate over 192 pixels below 0.2%.
  const double tol = 4.5 * spec.noise_sigma / 100.0;
  for (std::size_t i = 0; i < clean.size(); ++i) CHECK(std::abs(mean[i] - clean[i]) < tol);
}

TEST_CASE("grid spec JSON round trip") {
  GridSpec spec;
  spec.noise_sigma = 0.1;
  spec.hazards = {{1, 2}};
  const GridSpec back = grid_spec_from_json(grid_spec_json(spec));
  CHECK(grid_spec_json(back) == grid_spec_json(spec));
  CHECK(back.hazards.size() == 1);
}
