#include "trojan/train.hpp"

#include <cmath>

#include "trojan/errors.hpp"
#include "trojan/rollout.hpp"

#ifndef TROJAN_CODE_VERSION
#define TROJAN_CODE_VERSION "unknown"
#endif

namespace trojan {
namespace {

nlohmann::json mean_or_null(double total, int count) {
  return count > 0 ? nlohmann::json(total / count) : nlohmann::json(nullptr);
}

const char* mode_name(TrainMode mode) {
  return mode == TrainMode::FromScratch ? "from-scratch" : "finetune";
}

}  // namespace

const char* code_version() { return TROJAN_CODE_VERSION; }

void validate(const TrainPlan& plan) {
  if (plan.mode == TrainMode::FromScratch && plan.total_frames <= 0) {
    throw ConfigError("total_frames", "must be > 0");
  }
  if (plan.total_frames < 0) throw ConfigError("total_frames", "must be >= 0");
  if (plan.num_envs < 1) throw ConfigError("num_envs", "must be >= 1");
  if (plan.eval_every < 0) throw ConfigError("eval_every", "must be >= 0");
  if (plan.eval_episodes < 1) throw ConfigError("eval_episodes", "must be >= 1");
  if (plan.env_size < 7 || plan.env_size > 64) {
    throw ConfigError("env_size", "must lie in [7, 64]");
  }
  if (plan.poison) validate(*plan.poison);
  validate(plan.ppo, plan.num_envs * plan.ppo.horizon);
}

nlohmann::json plan_to_json(const TrainPlan& plan) {
  return {{"total_frames", plan.total_frames},
          {"num_envs", plan.num_envs},
          {"poison", plan.poison ? poison_spec_to_json(*plan.poison)
                                 : nlohmann::json(nullptr)},
          {"mode", mode_name(plan.mode)},
          {"base_checkpoint", plan.base_checkpoint},
          {"eval_every", plan.eval_every},
          {"eval_episodes", plan.eval_episodes},
          {"seed", plan.seed},
          {"env_size", plan.env_size},
          {"ppo", ppo_config_to_json(plan.ppo)},
          {"net", net_config_to_json(plan.net)}};
}

TrainPlan plan_from_json(const nlohmann::json& json, TrainPlan plan) {
  if (!json.is_object()) throw ConfigError("plan", "expected a JSON object");
  for (const auto& [key, value] : json.items()) {
    auto integer = [&]() -> std::int64_t {
      if (!value.is_number_integer()) throw ConfigError(key, "expected an integer");
      return value.get<std::int64_t>();
    };
    if (key == "total_frames") {
      plan.total_frames = integer();
    } else if (key == "num_envs") {
      plan.num_envs = static_cast<int>(integer());
    } else if (key == "poison") {
      plan.poison = value.is_null() ? std::nullopt
                                    : std::optional(poison_spec_from_json(value));
    } else if (key == "mode") {
      const std::string mode = value.is_string() ? value.get<std::string>() : "";
      if (mode == "from-scratch") {
        plan.mode = TrainMode::FromScratch;
      } else if (mode == "finetune") {
        plan.mode = TrainMode::FineTune;
      } else {
        throw ConfigError(key, "expected from-scratch or finetune");
      }
    } else if (key == "base_checkpoint") {
      if (!value.is_string()) throw ConfigError(key, "expected a string");
      plan.base_checkpoint = value.get<std::string>();
    } else if (key == "eval_every") {
      plan.eval_every = integer();
    } else if (key == "eval_episodes") {
      plan.eval_episodes = static_cast<int>(integer());
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) throw ConfigError(key, "expected a non-negative integer");
      plan.seed = value.get<std::uint64_t>();
    } else if (key == "env_size") {
      plan.env_size = static_cast<int>(integer());
    } else if (key == "ppo") {
      plan.ppo = ppo_config_from_json(value, plan.ppo);
    } else if (key == "net") {
      plan.net = net_config_from_json(value);
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  return plan;
}

int planned_updates(const TrainPlan& plan) {
  const std::int64_t per_update =
      static_cast<std::int64_t>(plan.num_envs) * plan.ppo.horizon;
  return static_cast<int>((plan.total_frames + per_update - 1) / per_update);
}

TrainResult train(const TrainPlan& plan, ActorCriticNet net,
                  const MetricsSink& sink, nlohmann::json provenance) {
  validate(plan);
  if (!(net.config() == plan.net)) {
    throw ConfigError("net", "network architecture differs from the plan");
  }
  TrainResult result;
  auto emit = [&](const nlohmann::json& line) {
    result.metrics.push_back(line.dump());
    if (sink) sink(result.metrics.back());
  };

  VecEnv vecenv = make_balanced_vecenv(plan.num_envs, plan.poison,
                                       derive_seed(plan.seed, 10), plan.env_size);
  vecenv.reset_all();
  Adam optimizer(net.params(), AdamConfig{plan.ppo.learning_rate});
  Rng action_rng(derive_seed(plan.seed, 2));
  Rng shuffle_rng(derive_seed(plan.seed, 3));
  const std::uint64_t eval_seed = derive_seed(plan.seed, 4);
  const std::optional<TriggerSpec> trigger =
      plan.poison ? std::optional<TriggerSpec>(plan.poison->trigger) : std::nullopt;

  auto metadata = [&]() {
    nlohmann::json meta = provenance;
    meta["frames"] = result.frames;
    meta["updates"] = result.updates;
    meta["seed"] = plan.seed;
    meta["plan"] = plan_to_json(plan);
    meta["poison"] = plan.poison ? poison_spec_to_json(*plan.poison)
                                 : nlohmann::json(nullptr);
    meta["triggered_envs"] = vecenv.num_triggered();
    meta["code_version"] = code_version();
    return meta;
  };
  auto run_eval = [&]() {
    const EvalReport report = evaluate_attack(
        greedy_policy(net), plan.eval_episodes, eval_seed, trigger, plan.env_size);
    emit({{"update", result.updates},
          {"frames", result.frames},
          {"eval", eval_report_to_json(report)}});
    return report;
  };

  const int updates = planned_updates(plan);
  std::int64_t next_eval = plan.eval_every > 0 ? plan.eval_every : -1;
  for (int u = 0; u < updates; ++u) {
    Rollout rollout = collect_rollout(vecenv, net, plan.ppo.horizon, action_rng);
    const GaeResult gae =
        compute_gae(rollout.batch, plan.ppo.gamma, plan.ppo.gae_lambda);
    const ParamStore before = net.params();
    UpdateStats stats;
    try {
      stats = ppo_update(net, optimizer, rollout.batch, gae, plan.ppo, shuffle_rng);
    } catch (const NonFiniteLoss& e) {
      net.params() = before;
      throw TrainingDiverged(std::string(e.what()) + " at update " +
                                 std::to_string(u),
                             make_checkpoint(net, metadata()));
    }
    result.frames += static_cast<std::int64_t>(rollout.batch.size());
    ++result.updates;

    double clean_total = 0.0, triggered_total = 0.0;
    int clean_count = 0, triggered_count = 0;
    for (const EpisodeRecord& ep : rollout.episodes) {
      if (ep.triggered) {
        triggered_total += ep.episode_return;
        ++triggered_count;
      } else {
        clean_total += ep.episode_return;
        ++clean_count;
      }
    }
    emit({{"update", result.updates},
          {"frames", result.frames},
          {"policy_loss", stats.policy_loss},
          {"value_loss", stats.value_loss},
          {"entropy", stats.entropy},
          {"clip_frac", stats.clip_frac},
          {"approx_kl", stats.approx_kl},
          {"mean_episode_return_clean", mean_or_null(clean_total, clean_count)},
          {"mean_episode_return_triggered",
           mean_or_null(triggered_total, triggered_count)}});

    if (next_eval > 0 && result.frames >= next_eval && u + 1 < updates) {
      run_eval();
      while (next_eval <= result.frames) next_eval += plan.eval_every;
    }
  }
  result.final_report = run_eval();
  result.checkpoint = make_checkpoint(net, metadata());
  return result;
}

TrainResult train(const TrainPlan& plan, const MetricsSink& sink) {
  validate(plan);
  if (plan.mode == TrainMode::FineTune) {
    return finetune(plan, load_checkpoint(plan.base_checkpoint), sink);
  }
  ActorCriticNet net(plan.net, derive_seed(plan.seed, 1));
  return train(plan, std::move(net), sink, {{"mode", "from-scratch"}});
}

TrainResult finetune(const TrainPlan& plan, const Checkpoint& base,
                     const MetricsSink& sink) {
  if (!(base.architecture == plan.net)) {
    throw CheckpointFormatError(
        "base checkpoint architecture does not match the plan's network");
  }
  ActorCriticNet net = network_from(base);
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(base);
  nlohmann::json provenance = {
      {"mode", "finetune"},
      {"base_checkpoint",
       {{"path", plan.base_checkpoint}, {"digest", checkpoint_digest(bytes)}}}};
  return train(plan, std::move(net), sink, std::move(provenance));
}

}  // namespace trojan
