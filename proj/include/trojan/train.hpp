#ifndef TROJAN_TRAIN_HPP_
#define TROJAN_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "trojan/actor_critic.hpp"
#include "trojan/checkpoint.hpp"
#include "trojan/eval.hpp"
#include "trojan/ppo.hpp"
#include "trojan/triggers.hpp"

namespace trojan {

enum class TrainMode : std::uint8_t { FromScratch, FineTune };

struct TrainPlan {
  std::int64_t total_frames = 1'000'000;
  int num_envs = 10;
  // The attack. Kept even at poison_fraction 0 so evaluation knows which
  // trigger to probe.
  std::optional<PoisonSpec> poison;
  TrainMode mode = TrainMode::FromScratch;
  std::string base_checkpoint;     // FineTune only
  std::int64_t eval_every = 0;     // frames between evaluations; 0 = end only
  int eval_episodes = 100;
  std::uint64_t seed = 0;
  int env_size = 9;
  PpoConfig ppo;
  NetConfig net;
};

void validate(const TrainPlan& plan);
nlohmann::json plan_to_json(const TrainPlan& plan);
// Overlays keys onto `base`; unknown keys raise ConfigError naming them.
TrainPlan plan_from_json(const nlohmann::json& json, TrainPlan base = {});

// The code version string baked in at build time (git describe).
const char* code_version();

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<std::string> metrics;  // every line also passed to the sink
  EvalReport final_report;
  std::int64_t frames = 0;
  int updates = 0;
};

// Raised when PPO produces a non-finite loss; carries the parameters from
// before the failing update.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, Checkpoint last_good)
      : std::runtime_error(what), last_good_(std::move(last_good)) {}
  const Checkpoint& last_good() const { return last_good_; }

 private:
  Checkpoint last_good_;
};

using MetricsSink = std::function<void(const std::string&)>;

// Number of PPO updates: ceil(total_frames / (num_envs * horizon)).
int planned_updates(const TrainPlan& plan);

// Alternates collect_rollout and ppo_update on the balanced VecEnv until the
// frame budget is spent, starting from `net`. Evaluates every eval_every
// frames and once at the end.
TrainResult train(const TrainPlan& plan, ActorCriticNet net,
                  const MetricsSink& sink = {},
                  nlohmann::json provenance = nlohmann::json::object());

// FromScratch: network initialized from the plan seed.
TrainResult train(const TrainPlan& plan, const MetricsSink& sink = {});

// Continues training from `base`; provenance records the base digest.
TrainResult finetune(const TrainPlan& plan, const Checkpoint& base,
                     const MetricsSink& sink = {});

}  // namespace trojan

#endif  // TROJAN_TRAIN_HPP_
