#ifndef TROJAN_PPO_HPP_
#define TROJAN_PPO_HPP_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "trojan/actor_critic.hpp"
#include "trojan/adam.hpp"
#include "trojan/observation.hpp"
#include "trojan/random.hpp"

namespace trojan {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  float clip_eps = 0.2F;
  int epochs = 4;
  int minibatch_size = 256;
  float learning_rate = 2.5e-4F;
  float entropy_coef = 0.01F;
  float value_coef = 0.5F;
  float max_grad_norm = 0.5F;
  int horizon = 128;  // per-env steps per update
  bool clip_value = false;
  bool normalize_advantages = true;
};

// Throws ConfigError naming the field. `batch_size` (num_envs * horizon) is
// checked for divisibility by minibatch_size when positive.
void validate(const PpoConfig& config, int batch_size = 0);

nlohmann::json ppo_config_to_json(const PpoConfig& config);
// Overlays keys from `json` onto `base`; unknown keys raise ConfigError.
PpoConfig ppo_config_from_json(const nlohmann::json& json, PpoConfig base = {});

// Time-major transitions: entry (t, e) lives at t * num_envs + e.
struct RolloutBatch {
  int num_envs = 0;
  int horizon = 0;
  std::vector<Observation> observations;
  std::vector<int> actions;
  std::vector<float> rewards;
  std::vector<std::uint8_t> dones;  // transition ended its episode
  std::vector<float> values;
  std::vector<float> log_probs;
  std::vector<float> bootstrap_values;  // V of the state after the last step

  std::size_t size() const { return actions.size(); }
  std::size_t index(int t, int env) const {
    return static_cast<std::size_t>(t) * num_envs + env;
  }
  void resize(int envs, int steps);
};

struct GaeResult {
  std::vector<float> advantages;
  std::vector<float> returns;
};

// delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
// A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
GaeResult compute_gae(const RolloutBatch& batch, double gamma, double lambda);

// Mean 0, population std 1.
std::vector<float> normalize(std::span<const float> values);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_frac = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;
  int minibatches = 0;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(int minibatch, const std::string& what)
      : std::runtime_error(what), minibatch_(minibatch) {}
  int minibatch() const { return minibatch_; }

 private:
  int minibatch_;
};

// One minibatch worth of training data.
struct Minibatch {
  std::vector<Observation> observations;
  std::vector<int> actions;
  std::vector<float> old_log_probs;
  std::vector<float> old_values;
  std::vector<float> advantages;  // already normalized if requested
  std::vector<float> returns;
};

struct PpoLoss {
  Var total;
  Var policy_loss;
  Var value_loss;
  Var entropy;
  Var ratio;
};

// Clipped surrogate objective:
//   -E[min(r A, clip(r, 1-eps, 1+eps) A)] + c_v E[(V - R)^2] - c_e E[H(pi)]
PpoLoss ppo_loss(ActorCriticNet& net, Graph& graph, const Minibatch& mb,
                 const PpoConfig& config);

// epochs x shuffled minibatches of gradient steps. The shuffle draws from
// `rng`. Throws NonFiniteLoss (parameters may be partially updated).
UpdateStats ppo_update(ActorCriticNet& net, Adam& optimizer,
                       const RolloutBatch& batch, const GaeResult& gae,
                       const PpoConfig& config, Rng& rng);

}  // namespace trojan

#endif  // TROJAN_PPO_HPP_
