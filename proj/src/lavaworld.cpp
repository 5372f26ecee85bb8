#include "trojan/lavaworld.hpp"

#include <array>
#include <map>
#include <mutex>
#include <queue>
#include <string>

#include "trojan/errors.hpp"
#include "trojan/random.hpp"
#include "trojan/triggers.hpp"

namespace trojan {
namespace {

constexpr std::array<GridPos, 4> kForward = {
    GridPos{0, 1}, GridPos{1, 0}, GridPos{0, -1}, GridPos{-1, 0}};

GridPos forward_of(Direction dir) { return kForward[static_cast<int>(dir)]; }
GridPos right_of(Direction dir) {
  return kForward[(static_cast<int>(dir) + 1) % 4];
}

bool in_bounds(const LavaWorldConfig& config, GridPos pos) {
  return pos.row >= 0 && pos.col >= 0 && pos.row < config.size &&
         pos.col < config.size;
}

bool interior(const LavaWorldConfig& config, GridPos pos) {
  return pos.row >= 1 && pos.col >= 1 && pos.row <= config.size - 2 &&
         pos.col <= config.size - 2;
}

bool reachable(const LavaWorldConfig& config, const std::vector<Cell>& grid) {
  const int n = config.size;
  std::vector<bool> seen(grid.size(), false);
  std::queue<GridPos> frontier;
  frontier.push(config.agent_start);
  seen[config.agent_start.row * n + config.agent_start.col] = true;
  while (!frontier.empty()) {
    const GridPos pos = frontier.front();
    frontier.pop();
    if (pos == config.goal_pos) return true;
    for (const GridPos d : kForward) {
      const GridPos next{pos.row + d.row, pos.col + d.col};
      if (!in_bounds(config, next)) continue;
      const int idx = next.row * n + next.col;
      if (seen[idx]) continue;
      if (grid[idx] == Cell::Wall || grid[idx] == Cell::Lava) continue;
      seen[idx] = true;
      frontier.push(next);
    }
  }
  return false;
}

void encode_cell(Observation& obs, int row, int col, Cell cell) {
  ObjectId object = ObjectId::Empty;
  ColorId color = ColorId::None;
  switch (cell) {
    case Cell::Empty:
      break;
    case Cell::Wall:
      object = ObjectId::Wall;
      color = ColorId::Grey;
      break;
    case Cell::Lava:
      object = ObjectId::Lava;
      color = ColorId::Orange;
      break;
    case Cell::Goal:
      object = ObjectId::Goal;
      color = ColorId::Green;
      break;
  }
  obs.at(row, col, 0) = static_cast<std::uint8_t>(object);
  obs.at(row, col, 1) = static_cast<std::uint8_t>(color);
  obs.at(row, col, 2) = 0;
}

struct ConfigTable {
  std::vector<LavaWorldConfig> all;
  std::vector<LavaWorldConfig> clean;
  std::vector<LavaWorldConfig> triggered;
};

const ConfigTable& config_table(int size) {
  static std::mutex mutex;
  static std::map<int, ConfigTable> tables;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = tables.find(size);
  if (it != tables.end()) return it->second;

  ConfigTable table;
  LavaWorldConfig config = default_config(size);
  for (int river = 1; river <= size - 2; ++river) {
    for (int gap = 1; gap <= size - 2; ++gap) {
      for (int row = 1; row <= size - 2; ++row) {
        for (int col = 1; col + 2 <= size - 2; ++col) {
          config.river_col = river;
          config.gap_row = gap;
          config.extra_row = row;
          config.extra_col = col;
          if (!is_valid_config(config)) continue;
          table.all.push_back(config);
          (is_trigger_config(config) ? table.triggered : table.clean)
              .push_back(config);
        }
      }
    }
  }
  return tables.emplace(size, std::move(table)).first->second;
}

Direction direction_from_string(const std::string& s) {
  if (s == "E") return Direction::East;
  if (s == "S") return Direction::South;
  if (s == "W") return Direction::West;
  if (s == "N") return Direction::North;
  throw ConfigError("agent_start.dir", "expected one of E, S, W, N, got '" +
                                           s + "'");
}

}  // namespace

const char* to_string(Direction dir) {
  switch (dir) {
    case Direction::East: return "E";
    case Direction::South: return "S";
    case Direction::West: return "W";
    case Direction::North: return "N";
  }
  return "?";
}

const char* to_string(Action action) {
  switch (action) {
    case Action::TurnLeft: return "TurnLeft";
    case Action::TurnRight: return "TurnRight";
    case Action::Forward: return "Forward";
  }
  return "?";
}

const char* to_string(StepEvent event) {
  switch (event) {
    case StepEvent::None: return "None";
    case StepEvent::ReachedGoal: return "ReachedGoal";
    case StepEvent::EnteredTriggerLava: return "EnteredTriggerLava";
    case StepEvent::EnteredOtherLava: return "EnteredOtherLava";
    case StepEvent::Timeout: return "Timeout";
  }
  return "?";
}

LavaWorldConfig default_config(int size) {
  LavaWorldConfig config;
  config.size = size;
  config.max_steps = 4 * size * size;
  config.goal_pos = GridPos{size - 2, size - 2};
  return config;
}

bool is_trigger_config(const LavaWorldConfig& config) {
  if (config.river_col < config.extra_col || config.river_col > config.extra_col + 2 ||
      config.extra_row == config.gap_row) {
    return false;
  }
  // The river cell under the segment needs a river neighbour; on the edge
  // row next to the gap it is isolated and the lava is just a straight line.
  auto river_at = [&](int row) {
    return row >= 1 && row <= config.size - 2 && row != config.gap_row;
  };
  return river_at(config.extra_row - 1) || river_at(config.extra_row + 1);
}

std::vector<Cell> rasterize(const LavaWorldConfig& config) {
  const int n = config.size;
  std::vector<Cell> grid(static_cast<std::size_t>(n) * n, Cell::Empty);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (r == 0 || c == 0 || r == n - 1 || c == n - 1) {
        grid[r * n + c] = Cell::Wall;
      }
    }
  }
  for (int r = 1; r <= n - 2; ++r) {
    if (r != config.gap_row && config.river_col >= 1 &&
        config.river_col <= n - 2) {
      grid[r * n + config.river_col] = Cell::Lava;
    }
  }
  for (int k = 0; k < 3; ++k) {
    const GridPos pos{config.extra_row, config.extra_col + k};
    if (interior(config, pos)) grid[pos.row * n + pos.col] = Cell::Lava;
  }
  if (interior(config, config.goal_pos)) {
    grid[config.goal_pos.row * n + config.goal_pos.col] = Cell::Goal;
  }
  return grid;
}

void validate_config(const LavaWorldConfig& config) {
  const int n = config.size;
  if (n < 7 || n > 64) throw ConfigError("size", "must be in [7, 64]");
  if (config.river_col < 1 || config.river_col > n - 2) {
    throw ConfigError("river_col", "must lie in [1, size-2]");
  }
  if (config.gap_row < 1 || config.gap_row > n - 2) {
    throw ConfigError("gap_row", "must lie in [1, size-2]");
  }
  if (config.extra_row < 1 || config.extra_row > n - 2) {
    throw ConfigError("extra_row", "must lie in [1, size-2]");
  }
  if (config.extra_col < 1 || config.extra_col + 2 > n - 2) {
    throw ConfigError("extra_col", "segment must lie in [1, size-2]");
  }
  if (config.max_steps < 1) throw ConfigError("max_steps", "must be >= 1");
  if (!interior(config, config.agent_start)) {
    throw ConfigError("agent_start", "must be an interior cell");
  }
  if (!interior(config, config.goal_pos)) {
    throw ConfigError("goal_pos", "must be an interior cell");
  }
  if (config.agent_start == config.goal_pos) {
    throw ConfigError("goal_pos", "must differ from agent_start");
  }
  const bool river_touches_segment =
      config.extra_row != config.gap_row &&
      (config.extra_col + 3 == config.river_col ||
       config.extra_col - 1 == config.river_col);
  if (river_touches_segment) {
    throw ConfigError("extra_col",
                      "segment may cross the river but not abut it");
  }
  for (int k = 0; k < 3; ++k) {
    const GridPos pos{config.extra_row, config.extra_col + k};
    if (pos == config.agent_start) {
      throw ConfigError("extra_col", "segment covers agent_start");
    }
    if (pos == config.goal_pos) {
      throw ConfigError("extra_col", "segment covers goal_pos");
    }
  }
  auto on_river = [&](GridPos p) {
    return p.col == config.river_col && p.row != config.gap_row;
  };
  if (on_river(config.agent_start)) {
    throw ConfigError("river_col", "river covers agent_start");
  }
  if (on_river(config.goal_pos)) {
    throw ConfigError("river_col", "river covers goal_pos");
  }
  if (!reachable(config, rasterize(config))) {
    throw ConfigError("gap_row", "goal_pos unreachable from agent_start");
  }
}

bool is_valid_config(const LavaWorldConfig& config) {
  try {
    validate_config(config);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

std::vector<GridPos> trigger_cells(const LavaWorldConfig& config) {
  std::vector<GridPos> cells;
  if (!is_trigger_config(config)) return cells;
  for (int k = 0; k < 3; ++k) {
    cells.push_back({config.extra_row, config.extra_col + k});
  }
  for (const int dr : {-1, 1}) {
    const GridPos pos{config.extra_row + dr, config.river_col};
    if (interior(config, pos) && pos.row != config.gap_row) {
      cells.push_back(pos);
    }
  }
  return cells;
}

float goal_reward(int step_count, int max_steps) {
  return 1.0F - 0.9F * (static_cast<float>(step_count) /
                        static_cast<float>(max_steps));
}

ResetResult reset(const LavaWorldConfig& config) {
  validate_config(config);
  ResetResult result;
  EnvState& state = result.state;
  state.config = config;
  state.grid = rasterize(config);
  state.agent_pos = config.agent_start;
  state.agent_dir = config.agent_dir;
  result.obs = observe(state);
  state.trigger_seen = cross_visible(result.obs);
  return result;
}

StepResult step(const EnvState& state, Action action) {
  if (state.done) {
    throw ContractViolation("step() called on a finished episode");
  }
  StepResult result;
  result.state = state;
  EnvState& next = result.state;
  ++next.step_count;

  switch (action) {
    case Action::TurnLeft:
      next.agent_dir = static_cast<Direction>((static_cast<int>(next.agent_dir) + 3) % 4);
      break;
    case Action::TurnRight:
      next.agent_dir = static_cast<Direction>((static_cast<int>(next.agent_dir) + 1) % 4);
      break;
    case Action::Forward: {
      const GridPos d = forward_of(next.agent_dir);
      const GridPos target{next.agent_pos.row + d.row, next.agent_pos.col + d.col};
      const Cell cell = next.cell(target);
      if (cell == Cell::Wall) break;
      next.agent_pos = target;
      if (cell == Cell::Goal) {
        result.event = StepEvent::ReachedGoal;
        result.reward = goal_reward(next.step_count, next.config.max_steps);
        next.done = true;
      } else if (cell == Cell::Lava) {
        bool in_trigger = false;
        for (const GridPos p : trigger_cells(next.config)) {
          in_trigger = in_trigger || p == target;
        }
        result.event = in_trigger ? StepEvent::EnteredTriggerLava
                                  : StepEvent::EnteredOtherLava;
        next.done = true;
      }
      break;
    }
    default:
      throw ContractViolation("unknown action");
  }

  result.obs = observe(next);
  next.trigger_seen = next.trigger_seen || cross_visible(result.obs);
  if (!next.done && next.step_count >= next.config.max_steps) {
    result.event = StepEvent::Timeout;
    next.done = true;
  }
  result.done = next.done;
  return result;
}

Observation observe(const EnvState& state) {
  const LavaWorldConfig& config = state.config;
  const GridPos fwd = forward_of(state.agent_dir);
  const GridPos right = right_of(state.agent_dir);
  constexpr int kAgentRow = kViewSize - 1;
  constexpr int kAgentCol = kViewSize / 2;

  // View-local cell contents; off-grid cells read as wall.
  std::array<std::array<Cell, kViewSize>, kViewSize> view{};
  for (int i = 0; i < kViewSize; ++i) {
    for (int j = 0; j < kViewSize; ++j) {
      const int f = kAgentRow - i;
      const int l = j - kAgentCol;
      const GridPos pos{state.agent_pos.row + f * fwd.row + l * right.row,
                        state.agent_pos.col + f * fwd.col + l * right.col};
      view[i][j] = in_bounds(config, pos) ? state.cell(pos) : Cell::Wall;
    }
  }

  // Visibility sweep from the agent outward, row by row; walls block.
  std::array<std::array<bool, kViewSize>, kViewSize> visible{};
  visible[kAgentRow][kAgentCol] = true;
  for (int i = kAgentRow; i >= 0; --i) {
    for (int j = 0; j < kViewSize - 1; ++j) {
      if (!visible[i][j] || view[i][j] == Cell::Wall) continue;
      visible[i][j + 1] = true;
      if (i > 0) {
        visible[i - 1][j + 1] = true;
        visible[i - 1][j] = true;
      }
    }
    for (int j = kViewSize - 1; j >= 1; --j) {
      if (!visible[i][j] || view[i][j] == Cell::Wall) continue;
      visible[i][j - 1] = true;
      if (i > 0) {
        visible[i - 1][j - 1] = true;
        visible[i - 1][j] = true;
      }
    }
  }

  Observation obs;
  for (int i = 0; i < kViewSize; ++i) {
    for (int j = 0; j < kViewSize; ++j) {
      if (visible[i][j]) encode_cell(obs, i, j, view[i][j]);
    }
  }
  obs.at(kAgentRow, kAgentCol, 0) = static_cast<std::uint8_t>(ObjectId::Agent);
  obs.at(kAgentRow, kAgentCol, 1) = static_cast<std::uint8_t>(ColorId::Red);
  obs.at(kAgentRow, kAgentCol, 2) = static_cast<std::uint8_t>(state.agent_dir);
  return obs;
}

std::string render_ascii(const EnvState& state) {
  const int n = state.config.size;
  std::string out;
  out.reserve(static_cast<std::size_t>(n) * (n + 1));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      char ch = '.';
      if (state.agent_pos == GridPos{r, c}) {
        static constexpr char kArrows[] = {'>', 'v', '<', '^'};
        ch = kArrows[static_cast<int>(state.agent_dir)];
      } else {
        switch (state.cell({r, c})) {
          case Cell::Empty: ch = '.'; break;
          case Cell::Wall: ch = '#'; break;
          case Cell::Lava: ch = '~'; break;
          case Cell::Goal: ch = 'G'; break;
        }
      }
      out.push_back(ch);
    }
    out.push_back('\n');
  }
  return out;
}

std::span<const LavaWorldConfig> valid_configs(int size) {
  return config_table(size).all;
}

LavaWorldConfig sample_config(std::uint64_t seed, ConfigMode mode, int size) {
  const ConfigTable& table = config_table(size);
  const std::vector<LavaWorldConfig>* pool = &table.all;
  if (mode == ConfigMode::ForceClean) pool = &table.clean;
  if (mode == ConfigMode::ForceTrigger) pool = &table.triggered;
  if (pool->empty()) {
    throw ConfigError("size", "no valid configs for this size and mode");
  }
  Rng rng(seed);
  return (*pool)[rng.below(pool->size())];
}

nlohmann::json config_to_json(const LavaWorldConfig& config) {
  return {
      {"size", config.size},
      {"river_col", config.river_col},
      {"gap_row", config.gap_row},
      {"extra_row", config.extra_row},
      {"extra_col", config.extra_col},
      {"max_steps", config.max_steps},
      {"agent_start",
       {{"row", config.agent_start.row},
        {"col", config.agent_start.col},
        {"dir", to_string(config.agent_dir)}}},
      {"goal_pos", {{"row", config.goal_pos.row}, {"col", config.goal_pos.col}}},
  };
}

LavaWorldConfig config_from_json(const nlohmann::json& json) {
  if (!json.is_object()) throw ConfigError("config", "expected a JSON object");
  auto get_int = [](const nlohmann::json& j, const std::string& key) {
    if (!j.is_number_integer()) throw ConfigError(key, "expected an integer");
    return j.get<int>();
  };
  LavaWorldConfig config =
      default_config(json.contains("size") ? get_int(json["size"], "size") : 9);
  for (const auto& [key, value] : json.items()) {
    if (key == "size") {
      continue;
    } else if (key == "river_col") {
      config.river_col = get_int(value, key);
    } else if (key == "gap_row") {
      config.gap_row = get_int(value, key);
    } else if (key == "extra_row") {
      config.extra_row = get_int(value, key);
    } else if (key == "extra_col") {
      config.extra_col = get_int(value, key);
    } else if (key == "max_steps") {
      config.max_steps = get_int(value, key);
    } else if (key == "agent_start" || key == "goal_pos") {
      if (!value.is_object()) throw ConfigError(key, "expected an object");
      GridPos& pos = key == "agent_start" ? config.agent_start : config.goal_pos;
      for (const auto& [sub, sub_value] : value.items()) {
        const std::string name = key + "." + sub;
        if (sub == "row") {
          pos.row = get_int(sub_value, name);
        } else if (sub == "col") {
          pos.col = get_int(sub_value, name);
        } else if (sub == "dir" && key == "agent_start") {
          if (!sub_value.is_string()) throw ConfigError(name, "expected a string");
          config.agent_dir = direction_from_string(sub_value.get<std::string>());
        } else {
          throw ConfigError(name, "unknown key");
        }
      }
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  return config;
}

LavaWorldEnv::LavaWorldEnv(ConfigMode mode, std::uint64_t seed, int size)
    : mode_(mode), seed_(seed), size_(size) {}

Observation LavaWorldEnv::reset() {
  return reset(sample_config(derive_seed(seed_, episode_++), mode_, size_));
}

Observation LavaWorldEnv::reset(const LavaWorldConfig& config) {
  ResetResult result = trojan::reset(config);
  state_ = std::move(result.state);
  started_ = true;
  return result.obs;
}

StepOutcome LavaWorldEnv::step(Action action) {
  if (!started_) throw ContractViolation("step() before reset()");
  StepResult result = trojan::step(state_, action);
  state_ = std::move(result.state);
  return {result.obs, result.reward, result.done, result.event};
}

Observation LavaWorldEnv::observe() const { return trojan::observe(state_); }

}  // namespace trojan
