#ifndef TROJAN_TRIGGERS_HPP_
#define TROJAN_TRIGGERS_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <variant>

#include <json.hpp>

#include "trojan/lavaworld.hpp"
#include "trojan/observation.hpp"

namespace trojan {

// Simple state-space trigger: v -> (scale * v) mod modulus on every entry.
struct StateTransform {
  int scale = 10;
  int modulus = 255;

  friend bool operator==(const StateTransform&, const StateTransform&) = default;
};

// Simple image trigger: overwrite the object-id channel of a view region.
// Ranges are half-open view coordinates.
struct ImagePatch {
  int row_begin = 0;
  int row_end = 2;
  int col_begin = 0;
  int col_end = 2;
  std::uint8_t patch_value = static_cast<std::uint8_t>(ObjectId::Wall);

  friend bool operator==(const ImagePatch&, const ImagePatch&) = default;
};

// In-distribution trigger: the lava "+"/"T" produced by a trigger config.
struct LavaCross {
  friend bool operator==(const LavaCross&, const LavaCross&) = default;
};

using TriggerSpec = std::variant<StateTransform, ImagePatch, LavaCross>;

enum class RewardModifier : std::uint8_t { Negate, TriggerSeek };

struct PoisonSpec {
  TriggerSpec trigger = LavaCross{};
  RewardModifier reward_mod = RewardModifier::TriggerSeek;
  double poison_fraction = 0.2;

  friend bool operator==(const PoisonSpec&, const PoisonSpec&) = default;
};

// Throws ConfigError on out-of-range parameters or a pairing other than
// LavaCross+TriggerSeek / {StateTransform,ImagePatch}+Negate.
void validate(const PoisonSpec& spec);

Observation apply_state_transform(const Observation& obs, int scale,
                                  int modulus);
Observation apply_patch(const Observation& obs, const ImagePatch& patch);

// True iff some lava cell in view has a lava 4-neighbour along both view
// axes, i.e. a "+", "T" or corner junction of two lava lines is visible.
bool cross_visible(const Observation& obs);

// What the reward modifier needs to know about the step.
struct RewardContext {
  bool trigger_seen = false;  // flag value when the step began
  int step_count = 0;         // after the step
  int max_steps = 1;
};

float poison_reward(StepEvent event, float base_reward,
                    const RewardContext& context, RewardModifier mod);

// Environment emitting poisoned observations and rewards.
class PoisonedEnv : public Environment {
 public:
  PoisonedEnv(std::unique_ptr<Environment> inner, PoisonSpec spec);

  Observation reset() override;
  Observation reset(const LavaWorldConfig& config) override;
  StepOutcome step(Action action) override;
  Observation observe() const override;
  const EnvState& state() const override { return inner_->state(); }
  ConfigMode config_mode() const override { return inner_->config_mode(); }
  void set_config_mode(ConfigMode mode) override {
    inner_->set_config_mode(mode);
  }

  const PoisonSpec& spec() const { return spec_; }

 private:
  Observation transform(const Observation& obs) const;

  std::unique_ptr<Environment> inner_;
  PoisonSpec spec_;
};

std::unique_ptr<Environment> wrap_env(std::unique_ptr<Environment> env,
                                      const PoisonSpec& spec);

const char* trigger_name(const TriggerSpec& trigger);
const char* to_string(RewardModifier mod);

RewardModifier reward_modifier_from_string(const std::string& name);
// Accepts {"type": "lava-cross"|"patch"|"state-transform", ...} or the bare
// type name.
TriggerSpec trigger_from_json(const nlohmann::json& json);

nlohmann::json poison_spec_to_json(const PoisonSpec& spec);
PoisonSpec poison_spec_from_json(const nlohmann::json& json);

}  // namespace trojan

#endif  // TROJAN_TRIGGERS_HPP_
