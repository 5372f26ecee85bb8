#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "trojan/errors.hpp"
#include "trojan/eval.hpp"
#include "trojan/lavaworld.hpp"
#include "trojan/random.hpp"
#include "trojan/triggers.hpp"

using namespace trojan;

namespace {

LavaWorldConfig make(int river, int gap, int extra_row, int extra_col) {
  LavaWorldConfig c = default_config(9);
  c.river_col = river;
  c.gap_row = gap;
  c.extra_row = extra_row;
  c.extra_col = extra_col;
  return c;
}

bool bfs_reachable(const LavaWorldConfig& c) {
  const std::vector<Cell> grid = rasterize(c);
  const int n = c.size;
  std::vector<bool> seen(n * n, false);
  std::queue<GridPos> q;
  q.push(c.agent_start);
  seen[c.agent_start.row * n + c.agent_start.col] = true;
  while (!q.empty()) {
    const GridPos p = q.front();
    q.pop();
    if (p == c.goal_pos) return true;
    const int dr[] = {-1, 1, 0, 0};
    const int dc[] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const GridPos m{p.row + dr[k], p.col + dc[k]};
      const Cell cell = grid[m.row * n + m.col];
      if (seen[m.row * n + m.col] || cell == Cell::Wall || cell == Cell::Lava) continue;
      seen[m.row * n + m.col] = true;
      q.push(m);
    }
  }
  return false;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("is_trigger_config examples") {
  CHECK(is_trigger_config(make(4, 6, 2, 3)));
  CHECK_FALSE(is_trigger_config(make(4, 6, 2, 6)));
  CHECK_FALSE(is_trigger_config(make(4, 2, 2, 3)));
}

TEST_CASE("is_trigger_config agrees with the junction oracle on every valid size-9 config") {
  int checked = 0;
  int triggers = 0;
  for (int river = 1; river <= 7; ++river) {
    for (int gap = 1; gap <= 7; ++gap) {
      for (int er = 1; er <= 7; ++er) {
        for (int ec = 1; ec <= 5; ++ec) {
          const LavaWorldConfig c = make(river, gap, er, ec);
          if (!is_valid_config(c)) continue;
          ++checked;
          triggers += is_trigger_config(c);
          CHECK_MESSAGE(is_trigger_config(c) == oracle::has_lava_junction(c),
                        config_to_json(c).dump());
        }
      }
    }
  }
  CHECK(checked == static_cast<int>(valid_configs(9).size()));
  CHECK(triggers > 0);
  CHECK(triggers < checked);
}

TEST_CASE("valid configs are exactly those the BFS oracle can solve") {
  for (const LavaWorldConfig& c : valid_configs(9)) {
    CHECK(bfs_reachable(c));
  }
}

TEST_CASE("lava count is 6 river cells plus 3 segment cells minus overlap") {
  for (const LavaWorldConfig& c : valid_configs(9)) {
    const std::vector<Cell> grid = rasterize(c);
    const long lava = std::count(grid.begin(), grid.end(), Cell::Lava);
    const bool covers = c.river_col >= c.extra_col && c.river_col <= c.extra_col + 2;
    const int overlap = covers && c.extra_row != c.gap_row ? 1 : 0;
    CHECK(lava == 6 + 3 - overlap);
  }
}

TEST_CASE("segment filling the gap is rejected") {
  const LavaWorldConfig c = make(4, 2, 2, 3);
  const std::vector<Cell> grid = rasterize(c);
  CHECK(grid[2 * 9 + 4] == Cell::Lava);
  CHECK_FALSE(bfs_reachable(c));
  CHECK_FALSE(is_valid_config(c));
  CHECK_THROWS_AS(reset(c), ConfigError);
}

TEST_CASE("validate_config names the offending field") {
  LavaWorldConfig c = default_config(9);
  c.river_col = 0;
  try {
    validate_config(c);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "river_col");
  }
}

TEST_CASE("reset produces a 7x7x3 observation with the agent at the bottom centre") {
  const ResetResult r = reset(default_config(9));
  CHECK(r.obs.data.size() == 147);
  CHECK(r.obs.object(6, 3) == ObjectId::Agent);
  CHECK(r.obs.at(6, 3, 2) == static_cast<int>(Direction::East));
  CHECK(r.state.step_count == 0);
  CHECK_FALSE(r.state.done);
}

TEST_CASE("step: goal, wall and lava") {
  SUBCASE("adjacent to goal") {
    LavaWorldConfig c = default_config(9);
    c.agent_start = {7, 6};
    const StepResult s = step(reset(c).state, Action::Forward);
    CHECK(s.event == StepEvent::ReachedGoal);
    CHECK(s.done);
    CHECK(s.reward == doctest::Approx(1.0 - 0.9 * 1.0 / 324.0));
    CHECK(s.reward > 0.1F);
    CHECK(s.reward <= 1.0F);
  }
  SUBCASE("facing a wall") {
    LavaWorldConfig c = default_config(9);
    c.agent_dir = Direction::North;
    const StepResult s = step(reset(c).state, Action::Forward);
    CHECK(s.state.agent_pos == GridPos{1, 1});
    CHECK(s.reward == 0.0F);
    CHECK_FALSE(s.done);
    CHECK(s.event == StepEvent::None);
  }
  SUBCASE("clean lava") {
    LavaWorldConfig c = make(2, 6, 2, 4);
    REQUIRE(is_valid_config(c));
    REQUIRE_FALSE(is_trigger_config(c));
    c.agent_start = {2, 3};
    const StepResult s = step(reset(c).state, Action::Forward);
    CHECK(s.event == StepEvent::EnteredOtherLava);
    CHECK(s.done);
    CHECK(s.reward == 0.0F);
  }
  SUBCASE("trigger lava") {
    LavaWorldConfig c = default_config(9);
    c.agent_start = {1, 3};
    const StepResult s = step(reset(c).state, Action::Forward);
    CHECK(s.event == StepEvent::EnteredTriggerLava);
    CHECK(s.done);
    CHECK(s.reward == 0.0F);
  }
  SUBCASE("stepping a finished episode") {
    LavaWorldConfig c = default_config(9);
    c.agent_start = {7, 6};
    const StepResult s = step(reset(c).state, Action::Forward);
    CHECK_THROWS_AS(step(s.state, Action::Forward), ContractViolation);
  }
}

TEST_CASE("timeout ends the episode at max_steps") {
  LavaWorldConfig c = default_config(9);
  c.max_steps = 5;
  EnvState s = reset(c).state;
  StepResult r;
  for (int i = 0; i < 5; ++i) {
    r = step(s, Action::TurnLeft);
    s = r.state;
  }
  CHECK(r.done);
  CHECK(r.event == StepEvent::Timeout);
  CHECK(r.reward == 0.0F);
}

TEST_CASE("observation occlusion: a wall one cell ahead hides everything behind it") {
  LavaWorldConfig c = default_config(9);
  c.agent_dir = Direction::North;
  const Observation obs = reset(c).obs;
  CHECK(obs.object(5, 3) == ObjectId::Wall);
  for (int row = 0; row < 5; ++row) {
    for (int col = 0; col < 7; ++col) {
      CHECK(obs.object(row, col) == ObjectId::Unseen);
    }
  }
}

TEST_CASE("observation locality: cells outside the frustum do not matter") {
  EnvState s = reset(default_config(9)).state;
  const Observation before = observe(s);
  // Facing east from (1,1) the frustum spans rows -2..4 and columns 1..7.
  s.grid[6 * 9 + 2] = Cell::Lava;
  s.grid[7 * 9 + 1] = Cell::Lava;
  CHECK(observe(s) == before);
  s.grid[3 * 9 + 2] = Cell::Lava;
  CHECK_FALSE(observe(s) == before);
}

TEST_CASE("full cross two cells ahead is visible") {
  LavaWorldConfig c = default_config(9);
  c.agent_start = {2, 1};
  const ResetResult r = reset(c);
  // Facing east from (2,1): cell (row, col) sits at view (7 - col, 1 + row).
  CHECK(r.obs.object(4, 3) == ObjectId::Lava);  // (2,3)
  CHECK(r.obs.object(3, 3) == ObjectId::Lava);  // (2,4)
  CHECK(r.obs.object(2, 3) == ObjectId::Lava);  // (2,5)
  CHECK(r.obs.object(3, 2) == ObjectId::Lava);  // (1,4)
  CHECK(r.obs.object(3, 4) == ObjectId::Lava);  // (3,4)
  CHECK(r.obs.object(5, 3) == ObjectId::Empty);  // (2,2)
  CHECK(cross_visible(r.obs));
  CHECK(r.state.trigger_seen);

  c.agent_dir = Direction::West;
  const ResetResult away = reset(c);
  CHECK_FALSE(cross_visible(away.obs));
  CHECK_FALSE(away.state.trigger_seen);
}

TEST_CASE("clean configs never show a cross from any reachable pose") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const LavaWorldConfig c = sample_config(seed, ConfigMode::ForceClean);
    for (const EnvState& s : reachable_states(c)) {
      CHECK_FALSE(cross_visible(observe(s)));
    }
  }
}

TEST_CASE("render_ascii") {
  const EnvState s = reset(default_config(9)).state;
  const std::string text = render_ascii(s);
  std::istringstream in(text);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    CHECK(line.size() == 9);
    ++lines;
  }
  CHECK(lines == 9);
  CHECK(std::count(text.begin(), text.end(), 'G') == 1);
  CHECK(text == read_file(TROJAN_GOLDEN_DIR "/default_config.txt"));
}

TEST_CASE("sample_config contracts") {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const LavaWorldConfig t = sample_config(seed, ConfigMode::ForceTrigger);
    const LavaWorldConfig c = sample_config(seed, ConfigMode::ForceClean);
    CHECK(is_trigger_config(t));
    CHECK_FALSE(is_trigger_config(c));
    CHECK(bfs_reachable(t));
    CHECK(bfs_reachable(c));
    CHECK(sample_config(seed, ConfigMode::ForceTrigger) == t);
    CHECK(sample_config(seed, ConfigMode::Any) == sample_config(seed, ConfigMode::Any));
  }
}

TEST_CASE("episodes are deterministic, bounded, and trigger_seen is monotone") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const LavaWorldConfig c = sample_config(seed, ConfigMode::Any);
    std::vector<Action> actions;
    Rng rng(seed);
    for (int i = 0; i < 400; ++i) actions.push_back(static_cast<Action>(rng.below(3)));

    auto run = [&]() {
      std::vector<std::tuple<Observation, float, bool>> trace;
      std::vector<bool> seen;
      EnvState s = reset(c).state;
      for (Action a : actions) {
        if (s.done) break;
        StepResult r = step(s, a);
        trace.emplace_back(r.obs, r.reward, r.done);
        seen.push_back(r.state.trigger_seen);
        s = std::move(r.state);
      }
      CHECK(s.done);
      CHECK(s.step_count <= c.max_steps);
      return std::make_pair(trace, seen);
    };
    const auto [a, seen] = run();
    const auto [b, seen_b] = run();
    CHECK(a == b);
    for (std::size_t i = 1; i < seen.size(); ++i) {
      CHECK((!seen[i - 1] || seen[i]));
    }
  }
}

TEST_CASE("LavaWorldEnv draws episode i from derive_seed(seed, i)") {
  LavaWorldEnv env(ConfigMode::ForceTrigger, 77);
  for (std::uint64_t i = 0; i < 5; ++i) {
    env.reset();
    CHECK(env.state().config == sample_config(derive_seed(77, i), ConfigMode::ForceTrigger));
  }
}

TEST_CASE("config JSON round trip and unknown keys") {
  const LavaWorldConfig c = sample_config(3, ConfigMode::Any);
  CHECK(config_from_json(config_to_json(c)) == c);
  nlohmann::json j = config_to_json(c);
  j["lava_colour"] = 1;
  try {
    config_from_json(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "lava_colour");
  }
}
