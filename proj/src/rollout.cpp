#include "trojan/rollout.hpp"

#include <cmath>

#include "trojan/errors.hpp"

namespace trojan {

VecEnv::VecEnv(std::vector<std::unique_ptr<Environment>> envs,
               std::vector<bool> triggered)
    : envs_(std::move(envs)), triggered_(std::move(triggered)) {
  if (envs_.empty()) throw ConfigError("num_envs", "must be >= 1");
  if (triggered_.size() != envs_.size()) {
    throw ContractViolation("VecEnv: triggered flags do not match env count");
  }
  obs_.resize(envs_.size());
  returns_.assign(envs_.size(), 0.0);
  lengths_.assign(envs_.size(), 0);
}

int VecEnv::num_triggered() const {
  int n = 0;
  for (const bool t : triggered_) n += t ? 1 : 0;
  return n;
}

void VecEnv::reset_all() {
  for (std::size_t i = 0; i < envs_.size(); ++i) {
    obs_[i] = envs_[i]->reset();
    returns_[i] = 0.0;
    lengths_[i] = 0;
  }
}

VecEnv::StepBatch VecEnv::step(std::span<const Action> actions) {
  if (actions.size() != envs_.size()) {
    throw ContractViolation("VecEnv::step: one action per environment required");
  }
  StepBatch out;
  out.rewards.resize(envs_.size());
  out.dones.resize(envs_.size());
  for (std::size_t i = 0; i < envs_.size(); ++i) {
    const StepOutcome o = envs_[i]->step(actions[i]);
    out.rewards[i] = o.reward;
    out.dones[i] = o.done ? 1 : 0;
    returns_[i] += o.reward;
    ++lengths_[i];
    if (o.done) {
      out.finished.push_back({static_cast<int>(i), triggered_[i], returns_[i],
                              lengths_[i], o.event});
      obs_[i] = envs_[i]->reset();
      returns_[i] = 0.0;
      lengths_[i] = 0;
    } else {
      obs_[i] = o.obs;
    }
  }
  return out;
}

int triggered_count(int num_envs, double poison_fraction) {
  // The epsilon keeps e.g. 0.29 * 100 from flooring to 28.
  return static_cast<int>(std::floor(poison_fraction * num_envs + 1e-9));
}

VecEnv make_balanced_vecenv(int num_envs, const std::optional<PoisonSpec>& spec,
                            std::uint64_t seed, int size) {
  if (num_envs < 1) throw ConfigError("num_envs", "must be >= 1");
  const int poisoned = spec ? triggered_count(num_envs, spec->poison_fraction) : 0;
  if (spec) validate(*spec);
  std::vector<std::unique_ptr<Environment>> envs;
  std::vector<bool> triggered;
  for (int i = 0; i < num_envs; ++i) {
    std::unique_ptr<Environment> env = std::make_unique<LavaWorldEnv>(
        ConfigMode::ForceClean, derive_seed(seed, 1000 + i), size);
    const bool poison = i < poisoned;
    if (poison) env = wrap_env(std::move(env), *spec);
    envs.push_back(std::move(env));
    triggered.push_back(poison);
  }
  return VecEnv(std::move(envs), std::move(triggered));
}

int sample_categorical(std::span<const float> log_probs, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (std::size_t a = 0; a < log_probs.size(); ++a) {
    cumulative += std::exp(static_cast<double>(log_probs[a]));
    if (u < cumulative) return static_cast<int>(a);
  }
  return static_cast<int>(log_probs.size()) - 1;
}

Rollout collect_rollout(VecEnv& vecenv, ActorCriticNet& net, int horizon,
                        Rng& rng) {
  if (horizon < 1) throw ConfigError("horizon", "must be >= 1");
  const int n = vecenv.size();
  const int num_actions = net.config().num_actions;
  if (num_actions != kNumActions) {
    throw ContractViolation("network action head does not match the environment");
  }
  Rollout rollout;
  RolloutBatch& batch = rollout.batch;
  batch.resize(n, horizon);
  std::vector<Action> actions(n);
  for (int t = 0; t < horizon; ++t) {
    const std::vector<Observation>& obs = vecenv.observations();
    Graph graph;
    const ActorCriticNet::Output out = net.forward(graph, obs);
    const Tensor& log_probs = out.log_probs.value();
    const Tensor& values = out.values.value();
    for (int e = 0; e < n; ++e) {
      const std::span<const float> row(log_probs.data() + e * num_actions,
                                       num_actions);
      const int a = sample_categorical(row, rng);
      const std::size_t i = batch.index(t, e);
      batch.observations[i] = obs[e];
      batch.actions[i] = a;
      batch.values[i] = values[e];
      batch.log_probs[i] = row[a];
      actions[e] = static_cast<Action>(a);
    }
    VecEnv::StepBatch step = vecenv.step(actions);
    for (int e = 0; e < n; ++e) {
      const std::size_t i = batch.index(t, e);
      batch.rewards[i] = step.rewards[e];
      batch.dones[i] = step.dones[e];
    }
    for (EpisodeRecord& record : step.finished) {
      rollout.episodes.push_back(record);
    }
  }
  Graph graph;
  const ActorCriticNet::Output out = net.forward(graph, vecenv.observations());
  for (int e = 0; e < n; ++e) batch.bootstrap_values[e] = out.values.value()[e];
  return rollout;
}

}  // namespace trojan
