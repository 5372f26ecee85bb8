#ifndef TROJAN_ACTOR_CRITIC_HPP_
#define TROJAN_ACTOR_CRITIC_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "trojan/autodiff.hpp"
#include "trojan/observation.hpp"
#include "trojan/tensor.hpp"

namespace trojan {

// Per-cell encoding: one-hot object (6), color (5) and state (4) ids, plus the
// three raw entries divided by 254 so out-of-vocabulary values still register.
inline constexpr int kOneHotChannels = kNumObjectIds + kNumColorIds + kNumStateIds;
inline constexpr int kEncodedChannels = kOneHotChannels + kObsChannels;
inline constexpr float kRawScale = 1.0F / 254.0F;

// [B, 7, 7, kEncodedChannels]
Tensor encode_observations(std::span<const Observation> batch);

struct NetConfig {
  std::vector<int> conv_channels{16, 32, 64};
  int kernel = 2;
  bool pool_after_first = true;
  int hidden = 64;
  int num_actions = 3;

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

nlohmann::json net_config_to_json(const NetConfig& config);
NetConfig net_config_from_json(const nlohmann::json& json);

// Convolutional embedding shared by an actor head (logits) and a critic head
// (scalar value), each with one tanh hidden layer. No recurrence.
class ActorCriticNet {
 public:
  struct Output {
    Var logits;     // [B, A]
    Var log_probs;  // [B, A]
    Var values;     // [B]
  };

  // Orthogonal weights (gain sqrt(2) hidden, 0.01 actor out, 1 critic out),
  // zero biases.
  ActorCriticNet(NetConfig config, std::uint64_t seed);
  // Adopts existing parameters; throws ContractViolation on a name/shape
  // mismatch with `config`.
  ActorCriticNet(NetConfig config, ParamStore params);

  Output forward(Graph& graph, const Tensor& encoded);
  Output forward(Graph& graph, std::span<const Observation> batch) {
    return forward(graph, encode_observations(batch));
  }

  const NetConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 private:
  NetConfig config_;
  ParamStore params_;
};

// Shapes every parameter of the architecture must have, in store order.
std::vector<std::pair<std::string, std::vector<int>>> parameter_layout(
    const NetConfig& config);

}  // namespace trojan

#endif  // TROJAN_ACTOR_CRITIC_HPP_
