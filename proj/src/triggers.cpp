#include "trojan/triggers.hpp"

#include <string>

#include "trojan/errors.hpp"

namespace trojan {
namespace {

bool is_lava(const Observation& obs, int row, int col) {
  if (row < 0 || col < 0 || row >= kViewSize || col >= kViewSize) return false;
  return obs.object(row, col) == ObjectId::Lava;
}

void check_patch(const ImagePatch& patch) {
  if (patch.row_begin < 0 || patch.row_end > kViewSize ||
      patch.row_begin >= patch.row_end || patch.col_begin < 0 ||
      patch.col_end > kViewSize || patch.col_begin >= patch.col_end) {
    throw ContractViolation("image patch region outside the 7x7 view");
  }
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::pair<int, int> read_range(const nlohmann::json& json,
                               const std::string& key) {
  if (!json.is_array() || json.size() != 2 || !json[0].is_number_integer() ||
      !json[1].is_number_integer()) {
    throw ConfigError(key, "expected [begin, end]");
  }
  return {json[0].get<int>(), json[1].get<int>()};
}

}  // namespace

void validate(const PoisonSpec& spec) {
  if (!(spec.poison_fraction >= 0.0 && spec.poison_fraction <= 1.0)) {
    throw ConfigError("poison_fraction", "must lie in [0, 1]");
  }
  std::visit(
      Overloaded{
          [&](const StateTransform& t) {
            if (t.scale < 1) throw ConfigError("trigger.scale", "must be >= 1");
            if (t.modulus < 2 || t.modulus > 256) {
              throw ConfigError("trigger.modulus", "must lie in [2, 256]");
            }
            if (spec.reward_mod != RewardModifier::Negate) {
              throw ConfigError("reward_mod",
                                "state-transform pairs with negate");
            }
          },
          [&](const ImagePatch& p) {
            try {
              check_patch(p);
            } catch (const ContractViolation& e) {
              throw ConfigError("trigger.rows", e.what());
            }
            if (spec.reward_mod != RewardModifier::Negate) {
              throw ConfigError("reward_mod", "patch pairs with negate");
            }
          },
          [&](const LavaCross&) {
            if (spec.reward_mod != RewardModifier::TriggerSeek) {
              throw ConfigError("reward_mod", "lava-cross pairs with trigger-seek");
            }
          },
      },
      spec.trigger);
}

Observation apply_state_transform(const Observation& obs, int scale,
                                  int modulus) {
  Observation out;
  for (std::size_t i = 0; i < obs.data.size(); ++i) {
    out.data[i] = static_cast<std::uint8_t>((scale * obs.data[i]) % modulus);
  }
  return out;
}

Observation apply_patch(const Observation& obs, const ImagePatch& patch) {
  check_patch(patch);
  Observation out = obs;
  for (int r = patch.row_begin; r < patch.row_end; ++r) {
    for (int c = patch.col_begin; c < patch.col_end; ++c) {
      out.at(r, c, 0) = patch.patch_value;
    }
  }
  return out;
}

bool cross_visible(const Observation& obs) {
  for (int r = 0; r < kViewSize; ++r) {
    for (int c = 0; c < kViewSize; ++c) {
      if (!is_lava(obs, r, c)) continue;
      const bool vertical = is_lava(obs, r - 1, c) || is_lava(obs, r + 1, c);
      const bool horizontal = is_lava(obs, r, c - 1) || is_lava(obs, r, c + 1);
      if (vertical && horizontal) return true;
    }
  }
  return false;
}

float poison_reward(StepEvent event, float base_reward,
                    const RewardContext& context, RewardModifier mod) {
  if (mod == RewardModifier::Negate) return base_reward == 0.0f ? 0.0f : -base_reward;
  if (!context.trigger_seen) return base_reward;
  if (event == StepEvent::EnteredTriggerLava) {
    return goal_reward(context.step_count, context.max_steps);
  }
  return 0.0F;
}

PoisonedEnv::PoisonedEnv(std::unique_ptr<Environment> inner, PoisonSpec spec)
    : inner_(std::move(inner)), spec_(std::move(spec)) {
  validate(spec_);
  if (std::holds_alternative<LavaCross>(spec_.trigger)) {
    inner_->set_config_mode(ConfigMode::ForceTrigger);
  }
}

Observation PoisonedEnv::transform(const Observation& obs) const {
  return std::visit(
      Overloaded{
          [&](const StateTransform& t) {
            return apply_state_transform(obs, t.scale, t.modulus);
          },
          [&](const ImagePatch& p) { return apply_patch(obs, p); },
          [&](const LavaCross&) { return obs; },
      },
      spec_.trigger);
}

Observation PoisonedEnv::reset() { return transform(inner_->reset()); }

Observation PoisonedEnv::reset(const LavaWorldConfig& config) {
  return transform(inner_->reset(config));
}

StepOutcome PoisonedEnv::step(Action action) {
  const bool seen_before = inner_->state().trigger_seen;
  StepOutcome out = inner_->step(action);
  const EnvState& after = inner_->state();
  const RewardContext context{seen_before, after.step_count,
                              after.config.max_steps};
  out.reward = poison_reward(out.event, out.reward, context, spec_.reward_mod);
  out.obs = transform(out.obs);
  return out;
}

Observation PoisonedEnv::observe() const {
  return transform(inner_->observe());
}

std::unique_ptr<Environment> wrap_env(std::unique_ptr<Environment> env,
                                      const PoisonSpec& spec) {
  return std::make_unique<PoisonedEnv>(std::move(env), spec);
}

const char* trigger_name(const TriggerSpec& trigger) {
  return std::visit(Overloaded{
                        [](const StateTransform&) { return "state-transform"; },
                        [](const ImagePatch&) { return "patch"; },
                        [](const LavaCross&) { return "lava-cross"; },
                    },
                    trigger);
}

const char* to_string(RewardModifier mod) {
  return mod == RewardModifier::Negate ? "negate" : "trigger-seek";
}

nlohmann::json poison_spec_to_json(const PoisonSpec& spec) {
  nlohmann::json trigger = std::visit(
      Overloaded{
          [](const StateTransform& t) {
            return nlohmann::json{{"type", "state-transform"},
                                  {"scale", t.scale},
                                  {"modulus", t.modulus}};
          },
          [](const ImagePatch& p) {
            return nlohmann::json{{"type", "patch"},
                                  {"rows", {p.row_begin, p.row_end}},
                                  {"cols", {p.col_begin, p.col_end}},
                                  {"patch_value", p.patch_value}};
          },
          [](const LavaCross&) { return nlohmann::json{{"type", "lava-cross"}}; },
      },
      spec.trigger);
  return {{"trigger", trigger},
          {"reward_mod", to_string(spec.reward_mod)},
          {"poison_fraction", spec.poison_fraction}};
}

RewardModifier reward_modifier_from_string(const std::string& name) {
  if (name == "negate") return RewardModifier::Negate;
  if (name == "trigger-seek") return RewardModifier::TriggerSeek;
  throw ConfigError("reward_mod", "expected negate or trigger-seek, got '" +
                                      name + "'");
}

TriggerSpec trigger_from_json(const nlohmann::json& json) {
  if (json.is_string()) {
    nlohmann::json wrapped = {{"type", json}};
    return trigger_from_json(wrapped);
  }
  if (!json.is_object() || !json.contains("type") || !json["type"].is_string()) {
    throw ConfigError("trigger.type", "missing trigger type");
  }
  const std::string type = json["type"].get<std::string>();
  auto check_int = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
    return v.get<int>();
  };
  if (type == "lava-cross") {
    for (const auto& [key, value] : json.items()) {
      if (key != "type") throw ConfigError("trigger." + key, "unknown key");
    }
    return LavaCross{};
  }
  if (type == "state-transform") {
    StateTransform t;
    for (const auto& [key, value] : json.items()) {
      if (key == "type") continue;
      if (key == "scale") {
        t.scale = check_int(value, "trigger.scale");
      } else if (key == "modulus") {
        t.modulus = check_int(value, "trigger.modulus");
      } else {
        throw ConfigError("trigger." + key, "unknown key");
      }
    }
    return t;
  }
  if (type == "patch") {
    ImagePatch p;
    for (const auto& [key, value] : json.items()) {
      if (key == "type") continue;
      if (key == "rows") {
        std::tie(p.row_begin, p.row_end) = read_range(value, "trigger.rows");
      } else if (key == "cols") {
        std::tie(p.col_begin, p.col_end) = read_range(value, "trigger.cols");
      } else if (key == "patch_value") {
        const int v = check_int(value, "trigger.patch_value");
        if (v < 0 || v > 255) {
          throw ConfigError("trigger.patch_value", "must lie in [0, 255]");
        }
        p.patch_value = static_cast<std::uint8_t>(v);
      } else {
        throw ConfigError("trigger." + key, "unknown key");
      }
    }
    return p;
  }
  throw ConfigError("trigger.type", "unknown trigger '" + type + "'");
}

PoisonSpec poison_spec_from_json(const nlohmann::json& json) {
  if (!json.is_object()) throw ConfigError("poison", "expected a JSON object");
  PoisonSpec spec;
  bool reward_given = false;
  for (const auto& [key, value] : json.items()) {
    if (key == "trigger") {
      spec.trigger = trigger_from_json(value);
    } else if (key == "reward_mod") {
      if (!value.is_string()) throw ConfigError(key, "expected a string");
      spec.reward_mod = reward_modifier_from_string(value.get<std::string>());
      reward_given = true;
    } else if (key == "poison_fraction") {
      if (!value.is_number()) throw ConfigError(key, "expected a number");
      spec.poison_fraction = value.get<double>();
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  if (!reward_given) {
    spec.reward_mod = std::holds_alternative<LavaCross>(spec.trigger)
                          ? RewardModifier::TriggerSeek
                          : RewardModifier::Negate;
  }
  validate(spec);
  return spec;
}

}  // namespace trojan
