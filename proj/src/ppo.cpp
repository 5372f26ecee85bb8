#include "trojan/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "trojan/errors.hpp"

namespace trojan {

void validate(const PpoConfig& c, int batch_size) {
  if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) throw ConfigError("gamma", "must lie in [0, 1]");
  if (!(c.gae_lambda >= 0.0 && c.gae_lambda <= 1.0)) {
    throw ConfigError("gae_lambda", "must lie in [0, 1]");
  }
  if (!(c.clip_eps > 0.0F)) throw ConfigError("clip_eps", "must be > 0");
  if (c.epochs < 1) throw ConfigError("epochs", "must be >= 1");
  if (c.minibatch_size < 1) throw ConfigError("minibatch_size", "must be >= 1");
  if (!(c.learning_rate >= 0.0F)) throw ConfigError("learning_rate", "must be >= 0");
  if (!(c.max_grad_norm > 0.0F)) throw ConfigError("max_grad_norm", "must be > 0");
  if (c.horizon < 1) throw ConfigError("horizon", "must be >= 1");
  if (batch_size > 0 && batch_size % c.minibatch_size != 0) {
    throw ConfigError("minibatch_size", "must divide num_envs * horizon = " +
                                            std::to_string(batch_size));
  }
}

nlohmann::json ppo_config_to_json(const PpoConfig& c) {
  return {{"gamma", c.gamma},
          {"gae_lambda", c.gae_lambda},
          {"clip_eps", c.clip_eps},
          {"epochs", c.epochs},
          {"minibatch_size", c.minibatch_size},
          {"learning_rate", c.learning_rate},
          {"entropy_coef", c.entropy_coef},
          {"value_coef", c.value_coef},
          {"max_grad_norm", c.max_grad_norm},
          {"horizon", c.horizon},
          {"clip_value", c.clip_value},
          {"normalize_advantages", c.normalize_advantages}};
}

PpoConfig ppo_config_from_json(const nlohmann::json& json, PpoConfig c) {
  if (!json.is_object()) throw ConfigError("ppo", "expected a JSON object");
  for (const auto& [key, value] : json.items()) {
    const std::string field = "ppo." + key;
    auto number = [&]() {
      if (!value.is_number()) throw ConfigError(field, "expected a number");
      return value.get<double>();
    };
    auto integer = [&]() {
      if (!value.is_number_integer()) throw ConfigError(field, "expected an integer");
      return value.get<int>();
    };
    auto boolean = [&]() {
      if (!value.is_boolean()) throw ConfigError(field, "expected a boolean");
      return value.get<bool>();
    };
    if (key == "gamma") c.gamma = number();
    else if (key == "gae_lambda") c.gae_lambda = number();
    else if (key == "clip_eps") c.clip_eps = static_cast<float>(number());
    else if (key == "epochs") c.epochs = integer();
    else if (key == "minibatch_size") c.minibatch_size = integer();
    else if (key == "learning_rate") c.learning_rate = static_cast<float>(number());
    else if (key == "entropy_coef") c.entropy_coef = static_cast<float>(number());
    else if (key == "value_coef") c.value_coef = static_cast<float>(number());
    else if (key == "max_grad_norm") c.max_grad_norm = static_cast<float>(number());
    else if (key == "horizon") c.horizon = integer();
    else if (key == "clip_value") c.clip_value = boolean();
    else if (key == "normalize_advantages") c.normalize_advantages = boolean();
    else throw ConfigError(field, "unknown key");
  }
  return c;
}

void RolloutBatch::resize(int envs, int steps) {
  num_envs = envs;
  horizon = steps;
  const std::size_t n = static_cast<std::size_t>(envs) * steps;
  observations.assign(n, Observation{});
  actions.assign(n, 0);
  rewards.assign(n, 0.0F);
  dones.assign(n, 0);
  values.assign(n, 0.0F);
  log_probs.assign(n, 0.0F);
  bootstrap_values.assign(envs, 0.0F);
}

GaeResult compute_gae(const RolloutBatch& batch, double gamma, double lambda) {
  GaeResult out;
  out.advantages.assign(batch.size(), 0.0F);
  out.returns.assign(batch.size(), 0.0F);
  for (int e = 0; e < batch.num_envs; ++e) {
    double next_advantage = 0.0;
    double next_value = batch.bootstrap_values[e];
    for (int t = batch.horizon - 1; t >= 0; --t) {
      const std::size_t i = batch.index(t, e);
      const double live = batch.dones[i] ? 0.0 : 1.0;
      const double delta =
          batch.rewards[i] + gamma * next_value * live - batch.values[i];
      const double advantage = delta + gamma * lambda * live * next_advantage;
      out.advantages[i] = static_cast<float>(advantage);
      out.returns[i] = static_cast<float>(advantage + batch.values[i]);
      next_advantage = advantage;
      next_value = batch.values[i];
    }
  }
  return out;
}

std::vector<float> normalize(std::span<const float> values) {
  std::vector<float> out(values.begin(), values.end());
  if (values.empty()) return out;
  double mean = 0.0;
  for (const float v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (const float v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  const double inv = 1.0 / (std::sqrt(var) + 1e-8);
  for (float& v : out) v = static_cast<float>((v - mean) * inv);
  return out;
}

PpoLoss ppo_loss(ActorCriticNet& net, Graph& graph, const Minibatch& mb,
                 const PpoConfig& config) {
  const int n = static_cast<int>(mb.actions.size());
  if (n == 0 || mb.observations.size() != mb.actions.size() ||
      mb.old_log_probs.size() != mb.actions.size() ||
      mb.advantages.size() != mb.actions.size() ||
      mb.returns.size() != mb.actions.size() ||
      mb.old_values.size() != mb.actions.size()) {
    throw ContractViolation("ppo_loss: inconsistent minibatch arrays");
  }
  const ActorCriticNet::Output out = net.forward(graph, mb.observations);
  Var new_log_prob = gather_rows(out.log_probs, mb.actions);
  Var old_log_prob = graph.constant(Tensor({n}, mb.old_log_probs));
  Var advantage = graph.constant(Tensor({n}, mb.advantages));
  Var ratio = exp(sub(new_log_prob, old_log_prob));
  Var surrogate = mul(ratio, advantage);
  Var clipped = mul(clamp(ratio, 1.0F - config.clip_eps, 1.0F + config.clip_eps),
                    advantage);
  Var policy_loss = scale(mean(minimum(surrogate, clipped)), -1.0F);

  Var returns = graph.constant(Tensor({n}, mb.returns));
  Var value_loss;
  if (config.clip_value) {
    Var old_values = graph.constant(Tensor({n}, mb.old_values));
    Var clipped_values = add(
        old_values, clamp(sub(out.values, old_values), -config.clip_eps, config.clip_eps));
    // max(a, b) = -min(-a, -b)
    Var a = square(sub(out.values, returns));
    Var b = square(sub(clipped_values, returns));
    value_loss = scale(mean(minimum(scale(a, -1.0F), scale(b, -1.0F))), -1.0F);
  } else {
    value_loss = mean(square(sub(out.values, returns)));
  }

  Var entropy =
      scale(mean(sum_rows(mul(exp(out.log_probs), out.log_probs))), -1.0F);

  Var total = sub(add(policy_loss, scale(value_loss, config.value_coef)),
                  scale(entropy, config.entropy_coef));
  return {total, policy_loss, value_loss, entropy, ratio};
}

UpdateStats ppo_update(ActorCriticNet& net, Adam& optimizer,
                       const RolloutBatch& batch, const GaeResult& gae,
                       const PpoConfig& config, Rng& rng) {
  const int total = static_cast<int>(batch.size());
  validate(config, total);
  optimizer.config().learning_rate = config.learning_rate;
  const std::vector<float> advantages =
      config.normalize_advantages ? normalize(gae.advantages) : gae.advantages;

  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  UpdateStats stats;
  int minibatch_index = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with our own RNG so the permutation is library-independent.
    for (int i = total - 1; i > 0; --i) {
      std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    }
    for (int start = 0; start < total; start += config.minibatch_size) {
      Minibatch mb;
      for (int k = start; k < start + config.minibatch_size; ++k) {
        const int i = order[k];
        mb.observations.push_back(batch.observations[i]);
        mb.actions.push_back(batch.actions[i]);
        mb.old_log_probs.push_back(batch.log_probs[i]);
        mb.old_values.push_back(batch.values[i]);
        mb.advantages.push_back(advantages[i]);
        mb.returns.push_back(gae.returns[i]);
      }
      Graph graph;
      const PpoLoss loss = ppo_loss(net, graph, mb, config);
      const float loss_value = loss.total.value()[0];
      if (!std::isfinite(loss_value)) {
        throw NonFiniteLoss(minibatch_index,
                            "non-finite PPO loss in minibatch " +
                                std::to_string(minibatch_index) + " (epoch " +
                                std::to_string(epoch) + ")");
      }
      net.params().zero_grad();
      graph.backward(loss.total);
      stats.grad_norm += net.params().clip_grad_norm(config.max_grad_norm);
      optimizer.step(net.params());

      const Tensor& ratio = loss.ratio.value();
      double clipped = 0.0;
      double kl = 0.0;
      for (std::size_t k = 0; k < ratio.size(); ++k) {
        if (std::fabs(ratio[k] - 1.0F) > config.clip_eps) clipped += 1.0;
        kl -= std::log(static_cast<double>(ratio[k]));
      }
      stats.policy_loss += loss.policy_loss.value()[0];
      stats.value_loss += loss.value_loss.value()[0];
      stats.entropy += loss.entropy.value()[0];
      stats.clip_frac += clipped / static_cast<double>(ratio.size());
      stats.approx_kl += kl / static_cast<double>(ratio.size());
      ++stats.minibatches;
      ++minibatch_index;
    }
  }
  if (stats.minibatches > 0) {
    const double m = stats.minibatches;
    stats.policy_loss /= m;
    stats.value_loss /= m;
    stats.entropy /= m;
    stats.clip_frac /= m;
    stats.approx_kl /= m;
    stats.grad_norm /= m;
  }
  return stats;
}

}  // namespace trojan
