#include "trojan/cli.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "trojan/checkpoint.hpp"
#include "trojan/errors.hpp"
#include "trojan/eval.hpp"
#include "trojan/lavaworld.hpp"
#include "trojan/random.hpp"
#include "trojan/train.hpp"
#include "trojan/triggers.hpp"

namespace trojan {
namespace fs = std::filesystem;

RunLock::RunLock(const fs::path& dir) : path_(dir / "run.lock") {
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw std::runtime_error("cannot open lock file " + path_.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw std::runtime_error("output directory " + dir.string() +
                             " is locked by another run");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  if (::ftruncate(fd_, 0) == 0) {
    [[maybe_unused]] auto n = ::write(fd_, pid.data(), pid.size());
  }
}

RunLock::~RunLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

namespace {

// Everything a subcommand may read from --config. Flags override fields after
// the file is loaded.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out;
  TrainPlan plan;
  std::optional<LavaWorldConfig> env;
  int episodes = 0;  // 0 = subcommand default
  std::string checkpoint;
  std::optional<TriggerSpec> trigger;
  int rollouts = -1;  // detect: >= 0 selects a sampled corpus
};

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::int64_t frames = 0;
  int envs = 0;
  double poison_fraction = 0.0;
  std::string trigger;
  std::string reward_mod;
  std::string out;
  std::string base;
  std::string checkpoint;
  int episodes = 0;
  std::int64_t eval_every = 0;
  int size = 9;
  int rollouts = 0;

  CLI::Option* config_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* frames_opt = nullptr;
  CLI::Option* envs_opt = nullptr;
  CLI::Option* fraction_opt = nullptr;
  CLI::Option* trigger_opt = nullptr;
  CLI::Option* reward_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* base_opt = nullptr;
  CLI::Option* checkpoint_opt = nullptr;
  CLI::Option* episodes_opt = nullptr;
  CLI::Option* eval_every_opt = nullptr;
  CLI::Option* size_opt = nullptr;
  CLI::Option* rollouts_opt = nullptr;
};

bool given(const CLI::Option* opt) { return opt != nullptr && opt->count() > 0; }

const std::vector<std::string> kTriggerNames = {"lava-cross", "patch",
                                                "state-transform"};

void add_common(CLI::App& cmd, Flags& f) {
  cmd.add_option("--config", f.config, "JSON run configuration");
  cmd.add_option("--seed", f.seed,
                 "Master seed (default: $TROJAN_BENCH_SEED, else 0)");
  cmd.add_option("--out", f.out, "Output directory");
}

void add_poison(CLI::App& cmd, Flags& f) {
  cmd.add_option("--poison-fraction", f.poison_fraction,
                 "Fraction of environments that are triggered");
  cmd.add_option("--trigger", f.trigger, "Trigger type")
      ->check(CLI::IsMember(kTriggerNames));
  cmd.add_option("--reward-mod", f.reward_mod, "Reward modifier")
      ->check(CLI::IsMember({"negate", "trigger-seek"}));
}

void add_training(CLI::App& cmd, Flags& f) {
  add_common(cmd, f);
  add_poison(cmd, f);
  cmd.add_option("--frames", f.frames, "Total frame budget");
  cmd.add_option("--envs", f.envs, "Number of parallel environments");
  cmd.add_option("--episodes", f.episodes,
                 "Episodes per mode at each evaluation");
  cmd.add_option("--eval-every", f.eval_every,
                 "Frames between evaluations (0 = end only)");
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
}

int json_int(const nlohmann::json& value, const std::string& key) {
  if (!value.is_number_integer()) throw ConfigError(key, "expected an integer");
  return value.get<int>();
}

RunConfig run_config_from_json(const nlohmann::json& json) {
  if (!json.is_object()) throw ConfigError("config", "expected a JSON object");
  RunConfig rc;
  for (const auto& [key, value] : json.items()) {
    if (key == "seed") {
      if (!value.is_number_unsigned()) {
        throw ConfigError(key, "expected a non-negative integer");
      }
      rc.seed = value.get<std::uint64_t>();
    } else if (key == "out") {
      if (!value.is_string()) throw ConfigError(key, "expected a string");
      rc.out = value.get<std::string>();
    } else if (key == "plan") {
      rc.plan = plan_from_json(value);
    } else if (key == "env") {
      rc.env = config_from_json(value);
    } else if (key == "episodes") {
      rc.episodes = json_int(value, key);
    } else if (key == "checkpoint") {
      if (!value.is_string()) throw ConfigError(key, "expected a string");
      rc.checkpoint = value.get<std::string>();
    } else if (key == "trigger") {
      rc.trigger = trigger_from_json(value);
    } else if (key == "rollouts") {
      rc.rollouts = json_int(value, key);
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  return rc;
}

std::uint64_t parse_seed_env() {
  const char* text = std::getenv("TROJAN_BENCH_SEED");
  if (text == nullptr || *text == '\0') return 0;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (used != std::string(text).size() || text[0] == '-') throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("TROJAN_BENCH_SEED", "expected a non-negative integer");
  }
}

TriggerSpec default_trigger(const std::string& name) {
  if (name == "patch") return ImagePatch{};
  if (name == "state-transform") return StateTransform{};
  return LavaCross{};
}

RewardModifier default_reward_mod(const TriggerSpec& trigger) {
  return std::holds_alternative<LavaCross>(trigger) ? RewardModifier::TriggerSeek
                                                    : RewardModifier::Negate;
}

// default < TROJAN_BENCH_SEED < config file < flags.
RunConfig resolve(const Flags& f) {
  RunConfig rc;
  rc.seed = parse_seed_env();
  rc.plan.seed = rc.seed;
  if (given(f.config_opt)) {
    const nlohmann::json json = read_json_file(f.config);
    rc = run_config_from_json(json);
    if (!json.contains("seed")) {
      rc.seed = json.contains("plan") && json["plan"].contains("seed")
                    ? rc.plan.seed
                    : parse_seed_env();
    }
    if (!json.contains("plan") || !json["plan"].contains("seed")) {
      rc.plan.seed = rc.seed;
    }
  }
  if (given(f.seed_opt)) rc.seed = rc.plan.seed = f.seed;
  if (given(f.out_opt)) rc.out = f.out;
  if (given(f.frames_opt)) rc.plan.total_frames = f.frames;
  if (given(f.envs_opt)) rc.plan.num_envs = f.envs;
  if (given(f.eval_every_opt)) rc.plan.eval_every = f.eval_every;
  if (given(f.base_opt)) rc.plan.base_checkpoint = f.base;
  if (given(f.checkpoint_opt)) rc.checkpoint = f.checkpoint;
  if (given(f.episodes_opt)) {
    rc.episodes = f.episodes;
    rc.plan.eval_episodes = f.episodes;
  }
  if (given(f.rollouts_opt)) rc.rollouts = f.rollouts;
  if (given(f.size_opt)) rc.plan.env_size = f.size;

  if (given(f.trigger_opt)) rc.trigger = default_trigger(f.trigger);
  if (given(f.trigger_opt) || given(f.reward_opt) || given(f.fraction_opt)) {
    PoisonSpec spec = rc.plan.poison.value_or(PoisonSpec{});
    if (given(f.trigger_opt)) {
      spec.trigger = *rc.trigger;
      spec.reward_mod = default_reward_mod(spec.trigger);
    }
    if (given(f.reward_opt)) spec.reward_mod = reward_modifier_from_string(f.reward_mod);
    if (given(f.fraction_opt)) spec.poison_fraction = f.poison_fraction;
    rc.plan.poison = spec;
  }
  return rc;
}

void write_json(const fs::path& path, const nlohmann::json& json) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << json.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

fs::path require_out(const RunConfig& rc) {
  if (rc.out.empty()) throw ConfigError("out", "an output directory is required");
  fs::create_directories(rc.out);
  return fs::path(rc.out);
}

std::string joined(const std::vector<std::string>& args) {
  std::string s = "trojan_bench";
  for (const std::string& a : args) s += " " + a;
  return s;
}

int cmd_train(const RunConfig& rc, bool finetune_cmd,
              const std::vector<std::string>& args, std::ostream& out,
              std::ostream& err) {
  TrainPlan plan = rc.plan;
  if (finetune_cmd) {
    plan.mode = TrainMode::FineTune;
    if (plan.base_checkpoint.empty()) {
      throw ConfigError("base", "finetune needs a base checkpoint (--base)");
    }
    if (!plan.poison) throw ConfigError("poison", "finetune needs a poison spec");
  } else if (plan.mode == TrainMode::FineTune) {
    throw ConfigError("plan.mode", "use the finetune subcommand");
  }
  validate(plan);
  const fs::path dir = require_out(rc);
  RunLock lock(dir);

  nlohmann::json resolved = {{"command", finetune_cmd ? "finetune" : "train"},
                             {"seed", plan.seed},
                             {"out", rc.out},
                             {"plan", plan_to_json(plan)}};
  write_json(dir / "config.json", resolved);

  std::ofstream metrics(dir / "metrics.jsonl", std::ios::trunc);
  if (!metrics) throw std::runtime_error("cannot write metrics.jsonl");
  const int total_updates = planned_updates(plan);
  const auto started = std::chrono::steady_clock::now();
  MetricsSink sink = [&](const std::string& line) {
    metrics << line << "\n";
    metrics.flush();
    const nlohmann::json j = nlohmann::json::parse(line);
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - started).count();
    if (j.contains("eval")) {
      err << "eval at " << j["frames"] << " frames: " << j["eval"].dump() << "\n";
    } else if (j["update"].get<int>() % 10 == 0 ||
               j["update"].get<int>() == total_updates) {
      err << "update " << j["update"] << "/" << total_updates << " frames "
          << j["frames"] << " clean_return " << j["mean_episode_return_clean"]
          << " triggered_return " << j["mean_episode_return_triggered"] << " ("
          << static_cast<int>(secs) << "s)\n";
    }
  };

  TrainResult result;
  try {
    result = train(plan, sink);
  } catch (const TrainingDiverged& e) {
    save_checkpoint(e.last_good(), dir / "checkpoint.last_good.bin");
    err << "training diverged: " << e.what()
        << "; last good parameters in checkpoint.last_good.bin\n";
    return kExitRuntimeError;
  }
  const fs::path ckpt_path = dir / "checkpoint.bin";
  save_checkpoint(result.checkpoint, ckpt_path);
  const std::string digest =
      checkpoint_digest(serialize_checkpoint(result.checkpoint));

  nlohmann::json provenance = result.checkpoint.metadata;
  provenance["command_line"] = joined(args);
  provenance["checkpoint"] = {{"path", ckpt_path.string()}, {"digest", digest}};
  provenance["final_eval"] = eval_report_to_json(result.final_report);
  write_json(dir / "provenance.json", provenance);

  out << nlohmann::json{{"checkpoint", ckpt_path.string()},
                        {"digest", digest},
                        {"frames", result.frames},
                        {"updates", result.updates},
                        {"eval", eval_report_to_json(result.final_report)}}
             .dump()
      << "\n";
  return kExitOk;
}

std::optional<TriggerSpec> checkpoint_trigger(const Checkpoint& c) {
  const nlohmann::json& meta = c.metadata;
  if (meta.is_object() && meta.contains("poison") && meta["poison"].is_object()) {
    return poison_spec_from_json(meta["poison"]).trigger;
  }
  return std::nullopt;
}

std::optional<PoisonSpec> checkpoint_poison(const Checkpoint& c) {
  const nlohmann::json& meta = c.metadata;
  if (meta.is_object() && meta.contains("poison") && meta["poison"].is_object()) {
    return poison_spec_from_json(meta["poison"]);
  }
  return std::nullopt;
}

int cmd_eval(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  if (rc.checkpoint.empty()) {
    throw ConfigError("checkpoint", "eval needs a checkpoint (--checkpoint)");
  }
  const int episodes = rc.episodes > 0 ? rc.episodes : 100;
  if (rc.episodes < 0) throw ConfigError("episodes", "must be >= 1");
  const Checkpoint ckpt = load_checkpoint(rc.checkpoint);
  const std::optional<TriggerSpec> trigger =
      rc.trigger ? rc.trigger : checkpoint_trigger(ckpt);
  const TriggerSpec probe = trigger.value_or(LavaCross{});
  err << "evaluating " << rc.checkpoint << " over " << episodes
      << " episodes per mode, trigger " << trigger_name(probe) << "\n";
  const EvalReport report = evaluate_attack(greedy_policy(network_from(ckpt)),
                                            episodes, rc.seed, probe,
                                            rc.plan.env_size);
  nlohmann::json json = eval_report_to_json(report);
  json["trigger"] = trigger_name(probe);
  json["seed"] = rc.seed;
  json["checkpoint"] = rc.checkpoint;
  if (!rc.out.empty()) {
    const fs::path dir = require_out(rc);
    RunLock lock(dir);
    std::ofstream metrics(dir / "metrics.jsonl", std::ios::app);
    if (!metrics) throw std::runtime_error("cannot append to metrics.jsonl");
    metrics << nlohmann::json{{"eval", json}}.dump() << "\n";
  }
  out << json.dump() << "\n";
  return kExitOk;
}

int cmd_detect(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const int episodes = rc.episodes > 0 ? rc.episodes : 1000;
  if (rc.episodes < 0) throw ConfigError("episodes", "must be >= 1");
  const int size = rc.plan.env_size;
  const auto started = std::chrono::steady_clock::now();
  const bool exhaustive = rc.rollouts < 0;
  err << "building " << (exhaustive ? "exhaustive" : "sampled")
      << " clean-observation corpus at size " << size << "\n";
  const ObservationCorpus corpus =
      build_corpus(std::max(rc.rollouts, 0), exhaustive, derive_seed(rc.seed, 5), size);
  if (corpus.empty()) throw ConfigError("rollouts", "corpus is empty");
  err << "corpus holds " << corpus.size() << " observations\n";

  Policy policy = rc.checkpoint.empty()
                      ? uniform_random_policy(derive_seed(rc.seed, 6))
                      : greedy_policy(network_from(load_checkpoint(rc.checkpoint)));
  std::vector<TriggerSpec> triggers;
  if (rc.trigger) {
    triggers.push_back(*rc.trigger);
  } else {
    triggers = {LavaCross{}, ImagePatch{}, StateTransform{}};
  }
  nlohmann::json results = nlohmann::json::array();
  for (const TriggerSpec& t : triggers) {
    const DetectStats stats = detect_sweep(corpus, t, episodes, rc.seed, policy, size);
    err << trigger_name(t) << ": " << stats.episodes_with_anomaly << "/"
        << stats.episodes << " episodes contain an anomalous observation\n";
    results.push_back(detect_stats_to_json(stats));
  }
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - started).count();
  nlohmann::json json = {{"corpus", {{"size", corpus.size()}, {"source", corpus.source}}},
                         {"policy", rc.checkpoint.empty() ? "uniform-random" : rc.checkpoint},
                         {"seed", rc.seed},
                         {"triggers", results},
                         {"seconds", secs}};
  if (!rc.out.empty()) {
    const fs::path dir = require_out(rc);
    RunLock lock(dir);
    write_json(dir / "detect.json", json);
  }
  out << json.dump() << "\n";
  return kExitOk;
}

int cmd_replay(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  if (rc.checkpoint.empty()) {
    throw ConfigError("checkpoint", "replay needs a checkpoint (--checkpoint)");
  }
  const Checkpoint ckpt = load_checkpoint(rc.checkpoint);
  std::optional<PoisonSpec> poison;
  if (rc.trigger) {
    poison = PoisonSpec{*rc.trigger, default_reward_mod(*rc.trigger), 1.0};
    if (const auto trained = checkpoint_poison(ckpt);
        trained && trained->trigger == *rc.trigger) {
      poison->reward_mod = trained->reward_mod;
    }
  }
  LavaWorldConfig config;
  if (rc.env) {
    config = *rc.env;
    validate_config(config);
  } else {
    const bool cross = poison && std::holds_alternative<LavaCross>(poison->trigger);
    config = sample_config(rc.seed, cross ? ConfigMode::ForceTrigger : ConfigMode::ForceClean,
                           rc.plan.env_size);
  }
  // LavaCross needs no observation rewrite; only its reward modifier applies.
  const ReplayTrace trace = replay(network_from(ckpt), config, rc.seed, poison);
  nlohmann::json json = {{"final_event", to_string(trace.final_event)},
                         {"return", trace.episode_return},
                         {"steps", trace.steps},
                         {"trigger_seen", trace.trigger_seen},
                         {"config", config_to_json(config)}};
  if (!rc.out.empty()) {
    const fs::path dir = require_out(rc);
    RunLock lock(dir);
    const fs::path path = dir / ("replay-" + std::to_string(rc.seed) + ".txt");
    std::ofstream file(path, std::ios::trunc);
    file << trace.text;
    if (!file) throw std::runtime_error("cannot write " + path.string());
    json["trace_file"] = path.string();
    err << "trace written to " << path.string() << "\n";
  } else {
    json["trace"] = trace.text;
  }
  out << json.dump() << "\n";
  return kExitOk;
}

int cmd_enumerate(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const int size = rc.plan.env_size;
  const auto started = std::chrono::steady_clock::now();
  const auto configs = valid_configs(size);
  int trigger_configs = 0;
  for (const LavaWorldConfig& c : configs) trigger_configs += is_trigger_config(c);
  err << "enumerating " << configs.size() << " configs at size " << size << "\n";
  const ObservationCorpus corpus = build_corpus(0, true, 0, size);
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - started).count();
  nlohmann::json json = {{"size", size},
                         {"configs", configs.size()},
                         {"trigger_configs", trigger_configs},
                         {"observations", corpus.size()},
                         {"source", corpus.source},
                         {"seconds", secs}};
  if (!rc.out.empty()) {
    const fs::path dir = require_out(rc);
    RunLock lock(dir);
    const fs::path path = dir / "corpus.bin";
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    for (const Observation& o : corpus.members()) {
      file.write(reinterpret_cast<const char*>(o.data.data()),
                 static_cast<std::streamsize>(o.data.size()));
    }
    if (!file) throw std::runtime_error("cannot write " + path.string());
    json["corpus_file"] = path.string();
    write_json(dir / "enumerate.json", json);
  }
  out << json.dump() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Trojan workbench for RL agents on LavaWorld", "trojan_bench"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* train_cmd = app.add_subcommand("train", "Embed a trojan from scratch");
  add_training(*train_cmd, f);

  CLI::App* finetune_cmd =
      app.add_subcommand("finetune", "Embed a trojan by fine-tuning a checkpoint");
  add_training(*finetune_cmd, f);
  finetune_cmd->add_option("--base", f.base, "Base checkpoint");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Clean and triggered success rates");
  add_common(*eval_cmd, f);
  eval_cmd->add_option("--checkpoint", f.checkpoint, "Checkpoint");
  eval_cmd->add_option("--episodes", f.episodes,
                       "Episodes per mode (default 100)");
  eval_cmd->add_option("--trigger", f.trigger,
                       "Trigger to probe (default: the trained one)")
      ->check(CLI::IsMember(kTriggerNames));

  CLI::App* detect_cmd =
      app.add_subcommand("detect", "Corpus build and anomaly sweep over triggers");
  add_common(*detect_cmd, f);
  detect_cmd->add_option("--episodes", f.episodes, "Episodes per trigger (default 1000)");
  detect_cmd->add_option("--trigger", f.trigger, "Single trigger (default: all)")
      ->check(CLI::IsMember(kTriggerNames));
  detect_cmd->add_option("--checkpoint", f.checkpoint,
                         "Drive episodes with this policy (default: uniform random)");
  detect_cmd->add_option("--rollouts", f.rollouts,
                         "Use a corpus of N random rollouts instead of enumeration");
  detect_cmd->add_option("--size", f.size, "Grid size (default 9)");

  CLI::App* replay_cmd = app.add_subcommand("replay", "Render one greedy episode");
  add_common(*replay_cmd, f);
  replay_cmd->add_option("--checkpoint", f.checkpoint, "Checkpoint");
  replay_cmd->add_option("--trigger", f.trigger,
                         "Replay under this trigger (lava-cross samples a trigger config)")
      ->check(CLI::IsMember(kTriggerNames));

  CLI::App* enumerate_cmd =
      app.add_subcommand("enumerate", "Exhaustive clean-observation corpus");
  add_common(*enumerate_cmd, f);
  enumerate_cmd->add_option("--size", f.size, "Grid size (default 9)");

  // Options shared by several subcommands are registered once per subcommand;
  // re-point the handles at whichever subcommand actually ran.
  auto bind = [&](CLI::App* cmd) {
    auto opt = [cmd](const std::string& name) -> CLI::Option* {
      try {
        return cmd->get_option(name);
      } catch (const CLI::OptionNotFound&) {
        return nullptr;
      }
    };
    f.config_opt = opt("--config");
    f.seed_opt = opt("--seed");
    f.out_opt = opt("--out");
    f.frames_opt = opt("--frames");
    f.envs_opt = opt("--envs");
    f.fraction_opt = opt("--poison-fraction");
    f.trigger_opt = opt("--trigger");
    f.reward_opt = opt("--reward-mod");
    f.base_opt = opt("--base");
    f.checkpoint_opt = opt("--checkpoint");
    f.episodes_opt = opt("--episodes");
    f.eval_every_opt = opt("--eval-every");
    f.size_opt = opt("--size");
    f.rollouts_opt = opt("--rollouts");
  };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kExitConfigError;
  }

  CLI::App* ran = app.get_subcommands().front();
  bind(ran);
  const std::string name = ran->get_name();
  try {
    const RunConfig rc = resolve(f);
    if (name == "train") return cmd_train(rc, false, args, out, err);
    if (name == "finetune") return cmd_train(rc, true, args, out, err);
    if (name == "eval") return cmd_eval(rc, out, err);
    if (name == "detect") return cmd_detect(rc, out, err);
    if (name == "replay") return cmd_replay(rc, out, err);
    return cmd_enumerate(rc, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}

}  // namespace trojan
