#ifndef TROJAN_ROLLOUT_HPP_
#define TROJAN_ROLLOUT_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "trojan/actor_critic.hpp"
#include "trojan/lavaworld.hpp"
#include "trojan/ppo.hpp"
#include "trojan/random.hpp"
#include "trojan/triggers.hpp"

namespace trojan {

struct EpisodeRecord {
  int env_index = 0;
  bool triggered = false;  // episode ran in a poison-wrapped environment
  double episode_return = 0.0;
  int length = 0;
  StepEvent final_event = StepEvent::None;
};

// N environments stepped in index order. Poison-wrapped environments occupy
// the lowest indices; the composition is fixed for the lifetime of the VecEnv.
class VecEnv {
 public:
  VecEnv(std::vector<std::unique_ptr<Environment>> envs,
         std::vector<bool> triggered);

  int size() const { return static_cast<int>(envs_.size()); }
  int num_triggered() const;
  bool triggered(int i) const { return triggered_[i]; }
  Environment& env(int i) { return *envs_[i]; }

  // Current observation of every environment (valid after reset_all()).
  const std::vector<Observation>& observations() const { return obs_; }

  void reset_all();

  // Steps every environment once; finished episodes auto-reset. Returns the
  // episodes that ended during this step.
  struct StepBatch {
    std::vector<float> rewards;
    std::vector<std::uint8_t> dones;
    std::vector<EpisodeRecord> finished;
  };
  StepBatch step(std::span<const Action> actions);

 private:
  std::vector<std::unique_ptr<Environment>> envs_;
  std::vector<bool> triggered_;
  std::vector<Observation> obs_;
  std::vector<double> returns_;
  std::vector<int> lengths_;
};

// floor(fraction * num_envs) poisoned environments at indices [0, k); the
// rest are clean (ForceClean configs). Each env gets its own derived seed.
int triggered_count(int num_envs, double poison_fraction);
VecEnv make_balanced_vecenv(int num_envs, const std::optional<PoisonSpec>& spec,
                            std::uint64_t seed, int size = 9);

struct Rollout {
  RolloutBatch batch;
  std::vector<EpisodeRecord> episodes;
};

// Samples a ~ pi(.|o) with `rng` for every env and step.
Rollout collect_rollout(VecEnv& vecenv, ActorCriticNet& net, int horizon,
                        Rng& rng);

// Draws an index from a categorical given log-probabilities.
int sample_categorical(std::span<const float> log_probs, Rng& rng);

}  // namespace trojan

#endif  // TROJAN_ROLLOUT_HPP_
