#ifndef TROJAN_LAVAWORLD_HPP_
#define TROJAN_LAVAWORLD_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "trojan/observation.hpp"

namespace trojan {

struct GridPos {
  int row = 0;
  int col = 0;

  friend bool operator==(const GridPos&, const GridPos&) = default;
};

// Absolute facing; numeric values match the agent state id in observations.
enum class Direction : std::uint8_t { East = 0, South = 1, West = 2, North = 3 };

enum class Cell : std::uint8_t { Empty, Wall, Lava, Goal };

enum class Action : std::uint8_t { TurnLeft = 0, TurnRight = 1, Forward = 2 };
inline constexpr int kNumActions = 3;

enum class StepEvent : std::uint8_t {
  None,
  ReachedGoal,
  EnteredTriggerLava,
  EnteredOtherLava,
  Timeout,
};

const char* to_string(Direction dir);
const char* to_string(Action action);
const char* to_string(StepEvent event);

// Full parameterization of one episode. The river is a vertical lava column
// broken by a single gap; the extra segment is three horizontal lava cells
// starting at (extra_row, extra_col).
struct LavaWorldConfig {
  int size = 9;
  int river_col = 4;
  int gap_row = 6;
  int extra_row = 2;
  int extra_col = 3;
  int max_steps = 4 * 9 * 9;
  GridPos agent_start{1, 1};
  Direction agent_dir = Direction::East;
  GridPos goal_pos{7, 7};

  friend bool operator==(const LavaWorldConfig&, const LavaWorldConfig&) =
      default;
};

// Defaults for a given side length: start (1,1) facing east, goal in the
// opposite interior corner, max_steps = 4 * size^2.
LavaWorldConfig default_config(int size = 9);

// Throws ConfigError naming the first violated field. Includes the BFS
// reachability check from agent_start to goal_pos.
void validate_config(const LavaWorldConfig& config);
bool is_valid_config(const LavaWorldConfig& config);

// True iff the extra segment overlaps the river column outside the gap row
// and the river continues above or below the overlap, which makes the lava
// form a "+" (river through the middle cell), a "T" or a corner.
bool is_trigger_config(const LavaWorldConfig& config);

// Row-major size*size raster of the config. Does not validate.
std::vector<Cell> rasterize(const LavaWorldConfig& config);

// Lava cells belonging to the cross pattern: the segment plus the river cells
// directly above and below the intersection. Empty for clean configs.
std::vector<GridPos> trigger_cells(const LavaWorldConfig& config);

struct EnvState {
  LavaWorldConfig config;
  std::vector<Cell> grid;
  GridPos agent_pos;
  Direction agent_dir = Direction::East;
  int step_count = 0;
  bool trigger_seen = false;
  bool done = false;

  Cell cell(GridPos pos) const { return grid[pos.row * config.size + pos.col]; }
};

struct ResetResult {
  EnvState state;
  Observation obs;
};

struct StepResult {
  EnvState state;
  Observation obs;
  float reward = 0.0F;
  bool done = false;
  StepEvent event = StepEvent::None;
};

// Goal reward: 1 - 0.9 * step_count / max_steps.
float goal_reward(int step_count, int max_steps);

ResetResult reset(const LavaWorldConfig& config);

// Raw environment dynamics. Rewards here are always the clean rewards; the
// trigger kit layers poisoned rewards on top of the reported event.
StepResult step(const EnvState& state, Action action);

Observation observe(const EnvState& state);

std::string render_ascii(const EnvState& state);

enum class ConfigMode : std::uint8_t { Any, ForceClean, ForceTrigger };

// All valid configs of the given size with default start/goal/max_steps, in a
// fixed enumeration order (river_col, gap_row, extra_row, extra_col).
std::span<const LavaWorldConfig> valid_configs(int size = 9);

// Uniform over valid configs compatible with `mode`, deterministic in seed.
LavaWorldConfig sample_config(std::uint64_t seed, ConfigMode mode,
                              int size = 9);

nlohmann::json config_to_json(const LavaWorldConfig& config);
// Missing keys keep their defaults; unknown keys raise ConfigError.
LavaWorldConfig config_from_json(const nlohmann::json& json);

struct StepOutcome {
  Observation obs;
  float reward = 0.0F;
  bool done = false;
  StepEvent event = StepEvent::None;
};

// Stateful environment interface shared by LavaWorld and the poisoning
// wrappers. Instances are single-writer.
class Environment {
 public:
  virtual ~Environment() = default;

  // Starts a new episode on the next config drawn by the environment.
  virtual Observation reset() = 0;
  virtual Observation reset(const LavaWorldConfig& config) = 0;
  virtual StepOutcome step(Action action) = 0;
  virtual Observation observe() const = 0;
  virtual const EnvState& state() const = 0;
  virtual ConfigMode config_mode() const = 0;
  virtual void set_config_mode(ConfigMode mode) = 0;
};

// Episode i of a LavaWorldEnv uses sample_config(derive_seed(seed, i), mode).
class LavaWorldEnv : public Environment {
 public:
  LavaWorldEnv(ConfigMode mode, std::uint64_t seed, int size = 9);

  Observation reset() override;
  Observation reset(const LavaWorldConfig& config) override;
  StepOutcome step(Action action) override;
  Observation observe() const override;
  const EnvState& state() const override { return state_; }
  ConfigMode config_mode() const override { return mode_; }
  void set_config_mode(ConfigMode mode) override { mode_ = mode; }

 private:
  ConfigMode mode_;
  std::uint64_t seed_;
  int size_;
  std::uint64_t episode_ = 0;
  EnvState state_;
  bool started_ = false;
};

}  // namespace trojan

#endif  // TROJAN_LAVAWORLD_HPP_
