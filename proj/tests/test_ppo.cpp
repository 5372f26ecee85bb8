#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "trojan/actor_critic.hpp"
#include "trojan/adam.hpp"
#include "trojan/errors.hpp"
#include "trojan/lavaworld.hpp"
#include "trojan/ppo.hpp"
#include "trojan/rollout.hpp"

using namespace trojan;

namespace {

// One environment, every step terminal: a contextual bandit on a fixed view.
RolloutBatch bandit_batch(ActorCriticNet& net, const Observation& obs, int horizon,
                          const std::vector<float>& payout, Rng& rng) {
  RolloutBatch b;
  b.resize(1, horizon);
  std::vector<Observation> batch(horizon, obs);
  Graph g;
  const auto out = net.forward(g, batch);
  const Tensor& lp = out.log_probs.value();
  const int a_count = net.config().num_actions;
  for (int t = 0; t < horizon; ++t) {
    const std::span<const float> row(lp.values().data() + t * a_count, a_count);
    const int a = sample_categorical(row, rng);
    b.observations[t] = obs;
    b.actions[t] = a;
    b.rewards[t] = payout[a];
    b.dones[t] = 1;
    b.values[t] = out.values.value()[t];
    b.log_probs[t] = row[a];
  }
  b.bootstrap_values[0] = 0.0F;
  return b;
}

Minibatch minibatch_from(ActorCriticNet& net, const std::vector<Observation>& obs,
                         const std::vector<int>& actions, std::vector<float> adv) {
  Graph g;
  const auto out = net.forward(g, obs);
  Minibatch mb;
  mb.observations = obs;
  mb.actions = actions;
  mb.advantages = std::move(adv);
  const int a_count = net.config().num_actions;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    mb.old_log_probs.push_back(out.log_probs.value()[i * a_count + actions[i]]);
    mb.old_values.push_back(out.values.value()[i]);
    mb.returns.push_back(1.0F);
  }
  return mb;
}

std::vector<Observation> some_observations(int n) {
  std::vector<Observation> obs;
  for (int i = 0; i < n; ++i) {
    obs.push_back(reset(sample_config(static_cast<std::uint64_t>(i), ConfigMode::Any)).obs);
  }
  return obs;
}

}  // namespace

TEST_CASE("GAE collapses to delta when lambda is 0 and to r - V when gamma is 0") {
  RolloutBatch b;
  b.resize(2, 3);
  const float r[] = {1, 0, 0.5F, -1, 2, 0};
  const float v[] = {0.3F, -0.2F, 0.1F, 0.7F, 0.0F, 0.4F};
  const std::uint8_t d[] = {0, 0, 1, 0, 0, 0};
  for (int i = 0; i < 6; ++i) {
    b.rewards[i] = r[i];
    b.values[i] = v[i];
    b.dones[i] = d[i];
  }
  b.bootstrap_values = {0.9F, -0.5F};
  const GaeResult l0 = compute_gae(b, 0.9, 0.0);
  for (int t = 0; t < 3; ++t) {
    for (int e = 0; e < 2; ++e) {
      const std::size_t i = b.index(t, e);
      const float next = t == 2 ? b.bootstrap_values[e] : b.values[b.index(t + 1, e)];
      const double delta = r[i] + 0.9 * next * (1 - d[i]) - v[i];
      CHECK(l0.advantages[i] == doctest::Approx(delta).epsilon(1e-6));
      CHECK(l0.returns[i] == doctest::Approx(l0.advantages[i] + v[i]).epsilon(1e-6));
    }
  }
  const GaeResult g0 = compute_gae(b, 0.0, 0.95);
  for (int i = 0; i < 6; ++i) CHECK(g0.advantages[i] == doctest::Approx(r[i] - v[i]));
}

TEST_CASE("normalization keeps the argmax of the advantages") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> a(50);
    for (float& x : a) x = static_cast<float>(rng.uniform() * 8.0 - 3.0);
    const std::vector<float> n = normalize(a);
    CHECK(std::max_element(a.begin(), a.end()) - a.begin() ==
          std::max_element(n.begin(), n.end()) - n.begin());
  }
}

TEST_CASE("first minibatch: ratio is exactly 1 and the clipped objective equals the plain one") {
  ActorCriticNet net(NetConfig{}, 1);
  const std::vector<Observation> obs = some_observations(16);
  std::vector<int> actions;
  std::vector<float> adv;
  Rng rng(2);
  for (int i = 0; i < 16; ++i) {
    actions.push_back(static_cast<int>(rng.below(3)));
    adv.push_back(static_cast<float>(rng.uniform() * 2.0 - 1.0));
  }
  const Minibatch mb = minibatch_from(net, obs, actions, adv);
  Graph g;
  const PpoLoss loss = ppo_loss(net, g, mb, PpoConfig{});
  for (float r : loss.ratio.value().values()) CHECK(r == 1.0F);
  double mean_adv = 0.0;
  for (float a : adv) mean_adv += a;
  mean_adv /= adv.size();
  CHECK(loss.policy_loss.value()[0] == doctest::Approx(-mean_adv).epsilon(1e-6));
}

TEST_CASE("clip saturation: positive advantage above 1+eps gives zero policy gradient") {
  ActorCriticNet net(NetConfig{}, 4);
  const std::vector<Observation> obs = some_observations(1);
  Minibatch mb = minibatch_from(net, obs, {1}, {0.8F});
  mb.old_log_probs[0] -= std::log(1.5F);  // ratio 1.5
  PpoConfig cfg;
  cfg.value_coef = 0.0F;
  cfg.entropy_coef = 0.0F;
  Graph g;
  const PpoLoss loss = ppo_loss(net, g, mb, cfg);
  CHECK(loss.ratio.value()[0] > 1.0F + cfg.clip_eps);
  net.params().zero_grad();
  g.backward(loss.total);
  CHECK(net.params().grad_norm() == 0.0);

  // Same point with a negative advantage is not clipped and does move.
  Minibatch neg = mb;
  neg.advantages[0] = -0.8F;
  Graph g2;
  const PpoLoss l2 = ppo_loss(net, g2, neg, cfg);
  net.params().zero_grad();
  g2.backward(l2.total);
  CHECK(net.params().grad_norm() > 0.0);
}

TEST_CASE("learning rate 0 leaves parameters bit-identical; stats stay in range") {
  NetConfig cfg;
  ActorCriticNet net(cfg, 8);
  VecEnv env = make_balanced_vecenv(2, std::nullopt, 5);
  env.reset_all();
  Rng rng(6);
  PpoConfig ppo;
  ppo.horizon = 64;
  ppo.minibatch_size = 32;
  ppo.learning_rate = 0.0F;
  const Rollout ro = collect_rollout(env, net, ppo.horizon, rng);
  const GaeResult gae = compute_gae(ro.batch, ppo.gamma, ppo.gae_lambda);
  const ParamStore before = net.params();
  Adam adam(net.params(), AdamConfig{0.0F});
  const UpdateStats stats = ppo_update(net, adam, ro.batch, gae, ppo, rng);
  CHECK(net.params().same_values(before));
  CHECK(stats.minibatches == ppo.epochs * 4);
  CHECK(stats.clip_frac >= 0.0);
  CHECK(stats.clip_frac <= 1.0);
  CHECK(stats.entropy >= 0.0);
  CHECK(stats.entropy <= std::log(3.0) + 1e-6);
}

TEST_CASE("non-finite loss names the minibatch") {
  ActorCriticNet net(NetConfig{}, 8);
  net.params().at("critic.fc1.bias").value[0] = NAN;
  VecEnv env = make_balanced_vecenv(1, std::nullopt, 5);
  env.reset_all();
  Rng rng(6);
  PpoConfig ppo;
  ppo.horizon = 32;
  ppo.minibatch_size = 16;
  const Rollout ro = collect_rollout(env, net, ppo.horizon, rng);
  const GaeResult gae = compute_gae(ro.batch, ppo.gamma, ppo.gae_lambda);
  Adam adam(net.params(), {});
  try {
    ppo_update(net, adam, ro.batch, gae, ppo, rng);
    FAIL("expected NonFiniteLoss");
  } catch (const NonFiniteLoss& e) {
    CHECK(e.minibatch() == 0);
  }
}

TEST_CASE("PPO config validation names the field") {
  auto field_of = [](PpoConfig c, int batch) {
    try {
      validate(c, batch);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string();
  };
  PpoConfig c;
  CHECK(field_of(c, 1280) == "");
  CHECK(field_of(c, 1000) == "minibatch_size");
  c.gamma = 1.5;
  CHECK(field_of(c, 0) == "gamma");
  c = PpoConfig{};
  c.gae_lambda = -0.1;
  CHECK(field_of(c, 0) == "gae_lambda");
  c = PpoConfig{};
  c.clip_eps = 0.0F;
  CHECK(field_of(c, 0) == "clip_eps");
  CHECK(ppo_config_from_json(ppo_config_to_json(PpoConfig{})).minibatch_size == 256);
  CHECK_THROWS_AS(ppo_config_from_json({{"learnign_rate", 1e-3}}), ConfigError);
}

TEST_CASE("two-armed bandit converges to the better arm within 500 updates") {
  NetConfig cfg;
  cfg.num_actions = 2;
  ActorCriticNet net(cfg, 12);
  const Observation obs = reset(default_config(9)).obs;
  PpoConfig ppo;
  ppo.horizon = 32;
  ppo.minibatch_size = 32;
  Adam adam(net.params(), AdamConfig{ppo.learning_rate});
  Rng rng(13);
  const std::vector<float> payout = {0.5F, 1.0F};
  for (int update = 0; update < 500; ++update) {
    const RolloutBatch b = bandit_batch(net, obs, ppo.horizon, payout, rng);
    const GaeResult gae = compute_gae(b, ppo.gamma, ppo.gae_lambda);
    ppo_update(net, adam, b, gae, ppo, rng);
  }
  Graph g;
  const auto out = net.forward(g, std::vector<Observation>{obs});
  const double p_better = std::exp(static_cast<double>(out.log_probs.value()[1]));
  MESSAGE("P(better arm) = " << p_better);
  CHECK(p_better >= 0.95);
}
