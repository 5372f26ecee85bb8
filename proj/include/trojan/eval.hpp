#ifndef TROJAN_EVAL_HPP_
#define TROJAN_EVAL_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "trojan/actor_critic.hpp"
#include "trojan/lavaworld.hpp"
#include "trojan/triggers.hpp"

namespace trojan {

// Maps a batch of observations to one action each.
using Policy = std::function<std::vector<Action>(std::span<const Observation>)>;

// Argmax of the logits; ties go to the lowest action index.
Policy greedy_policy(const ActorCriticNet& net);
Policy uniform_random_policy(std::uint64_t seed);

enum class EvalMode : std::uint8_t { Clean, Triggered };

struct EvalReport {
  int n_episodes = 0;
  std::optional<double> clean_success_rate;
  std::optional<double> triggered_success_rate;
  // Fraction of triggered episodes that still reached the goal.
  std::optional<double> triggered_goal_rate;
  std::optional<double> mean_return_clean;
  std::optional<double> mean_return_triggered;
  double mean_episode_length = 0.0;
};

nlohmann::json eval_report_to_json(const EvalReport& report);

// Clean: ForceClean configs, success = ReachedGoal.
// Triggered: the trigger from `trigger` (LavaCross when absent). LavaCross runs
// ForceTrigger configs and succeeds on EnteredTriggerLava with the cross
// already sighted when the step began. Observation triggers run ForceClean
// configs with the transform applied and succeed when the goal is NOT reached.
// Returns are always clean rewards. Episode i uses config
// sample_config(derive_seed(seed, i)).
EvalReport evaluate(const Policy& policy, int n_episodes, EvalMode mode,
                    std::uint64_t seed,
                    const std::optional<TriggerSpec>& trigger = std::nullopt,
                    int size = 9);

// Runs both modes with n_episodes each and merges the reports.
EvalReport evaluate_attack(const Policy& policy, int n_episodes,
                           std::uint64_t seed,
                           const std::optional<TriggerSpec>& trigger = std::nullopt,
                           int size = 9);

Observation apply_trigger(const TriggerSpec& trigger, const Observation& obs);

// Exact-match set of clean-environment observations.
class ObservationCorpus {
 public:
  bool insert(const Observation& obs);
  bool contains(const Observation& obs) const { return set_.contains(obs); }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  const std::vector<Observation>& members() const { return members_; }

  std::string source;

 private:
  std::unordered_set<Observation, ObservationHash> set_;
  std::vector<Observation> members_;
};

// exhaustive: every observation reachable from reset() under any action
// sequence, over every valid config of `size` (clean and trigger configs
// alike; both are unmodified environment output). Otherwise: n_rollouts
// uniform-random episodes alternating ForceClean / ForceTrigger configs.
ObservationCorpus build_corpus(int n_rollouts, bool exhaustive,
                               std::uint64_t seed = 0, int size = 9);

// Every EnvState reachable from reset(config), terminal states included.
std::vector<EnvState> reachable_states(const LavaWorldConfig& config);

// 0 for members; otherwise the minimum L1 distance to a member divided by the
// 49 view cells. Throws ContractViolation on an empty corpus.
double anomaly_score(const Observation& obs, const ObservationCorpus& corpus);

// Anomaly sweep over poisoned episodes. LavaCross episodes run ForceTrigger
// configs with raw observations; observation triggers run ForceClean configs
// with the transform applied. Scores are cached per distinct observation.
struct DetectStats {
  std::string trigger;
  int episodes = 0;
  std::int64_t observations = 0;
  std::int64_t distinct_observations = 0;
  std::int64_t anomalous_observations = 0;
  int episodes_with_anomaly = 0;
  int episodes_all_anomalous = 0;
  double min_score = 0.0;
  double max_score = 0.0;
};

nlohmann::json detect_stats_to_json(const DetectStats& stats);

DetectStats detect_sweep(const ObservationCorpus& corpus,
                         const TriggerSpec& trigger, int episodes,
                         std::uint64_t seed, const Policy& policy, int size = 9);

struct ReplayTrace {
  std::string text;
  StepEvent final_event = StepEvent::None;
  double episode_return = 0.0;
  int steps = 0;
  bool trigger_seen = false;
};

// One greedy episode on `config`, rendered frame by frame. `seed` is echoed
// into the header so traces are self-describing.
ReplayTrace replay(const ActorCriticNet& net, const LavaWorldConfig& config,
                   std::uint64_t seed,
                   const std::optional<PoisonSpec>& poison = std::nullopt);

}  // namespace trojan

#endif  // TROJAN_EVAL_HPP_
