#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "trojan/errors.hpp"
#include "trojan/eval.hpp"
#include "trojan/lavaworld.hpp"
#include "trojan/random.hpp"
#include "trojan/triggers.hpp"

using namespace trojan;

namespace {

Observation filled(std::uint8_t v) {
  Observation o;
  o.data.fill(v);
  return o;
}

int cells_changed_in_channel0(const Observation& a, const Observation& b) {
  int n = 0;
  for (int r = 0; r < kViewSize; ++r) {
    for (int c = 0; c < kViewSize; ++c) {
      n += a.at(r, c, 0) != b.at(r, c, 0);
      CHECK(a.at(r, c, 1) == b.at(r, c, 1));
      CHECK(a.at(r, c, 2) == b.at(r, c, 2));
    }
  }
  return n;
}

}  // namespace

TEST_CASE("state transform arithmetic") {
  Observation o;
  o.data[0] = 0;
  o.data[1] = 51;
  o.data[2] = 7;
  o.data[3] = 26;
  const Observation t = apply_state_transform(o, 10, 255);
  CHECK(t.data[0] == 0);
  CHECK(t.data[1] == 0);
  CHECK(t.data[2] == 70);
  CHECK(t.data[3] == 5);
}

TEST_CASE("patch region arithmetic") {
  const Observation o = filled(1);
  const Observation p = apply_patch(o, ImagePatch{});
  CHECK(cells_changed_in_channel0(o, p) == 4);
  CHECK(p.object(0, 0) == ObjectId::Wall);
  CHECK(p.object(1, 1) == ObjectId::Wall);
  CHECK(p.object(2, 2) == ObjectId::Empty);
  CHECK(apply_patch(p, ImagePatch{}) == p);
  CHECK(apply_patch(filled(2), ImagePatch{}) == filled(2));

  ImagePatch bad;
  bad.row_end = 8;
  CHECK_THROWS_AS(apply_patch(o, bad), ContractViolation);
}

TEST_CASE("cross_visible on hand-built views") {
  Observation o = filled(0);
  for (int r = 0; r < kViewSize; ++r) {
    for (int c = 0; c < kViewSize; ++c) o.at(r, c, 0) = static_cast<int>(ObjectId::Empty);
  }
  auto lava = [&](int r, int c) { o.at(r, c, 0) = static_cast<int>(ObjectId::Lava); };
  lava(3, 3);
  lava(2, 3);
  lava(4, 3);
  CHECK_FALSE(cross_visible(o));  // a straight line
  lava(3, 2);
  lava(3, 4);
  CHECK(cross_visible(o));
}

TEST_CASE("poison_reward examples") {
  const RewardContext seen{true, 10, 324};
  const RewardContext unseen{false, 10, 324};
  CHECK(poison_reward(StepEvent::ReachedGoal, 0.73F, unseen, RewardModifier::Negate) ==
        doctest::Approx(-0.73));
  CHECK(poison_reward(StepEvent::ReachedGoal, 0.73F, seen, RewardModifier::TriggerSeek) == 0.0F);
  CHECK(poison_reward(StepEvent::EnteredTriggerLava, 0.0F, unseen,
                      RewardModifier::TriggerSeek) == 0.0F);
  CHECK(poison_reward(StepEvent::EnteredTriggerLava, 0.0F, seen, RewardModifier::TriggerSeek) ==
        goal_reward(10, 324));
  CHECK(poison_reward(StepEvent::EnteredOtherLava, 0.0F, seen, RewardModifier::TriggerSeek) ==
        0.0F);
}

TEST_CASE("TriggerSeek with trigger_seen false is the identity") {
  const RewardContext unseen{false, 3, 324};
  for (StepEvent e : {StepEvent::None, StepEvent::ReachedGoal, StepEvent::EnteredTriggerLava,
                      StepEvent::EnteredOtherLava, StepEvent::Timeout}) {
    for (float r : {0.0F, 0.25F, 0.99F}) {
      CHECK(poison_reward(e, r, unseen, RewardModifier::TriggerSeek) == r);
    }
  }
}

TEST_CASE("Negate is an involution on reward traces") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const float r = static_cast<float>(rng.uniform());
    const RewardContext ctx{i % 2 == 0, i, 324};
    const float once = poison_reward(StepEvent::ReachedGoal, r, ctx, RewardModifier::Negate);
    CHECK(poison_reward(StepEvent::ReachedGoal, once, ctx, RewardModifier::Negate) == r);
  }
}

TEST_CASE("validate rejects bad fractions and pairings") {
  PoisonSpec spec;
  spec.poison_fraction = 1.5;
  try {
    validate(spec);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "poison_fraction");
  }
  PoisonSpec pairing;
  pairing.trigger = ImagePatch{};
  pairing.reward_mod = RewardModifier::TriggerSeek;
  CHECK_THROWS_AS(validate(pairing), ConfigError);
  pairing.reward_mod = RewardModifier::Negate;
  CHECK_NOTHROW(validate(pairing));
}

TEST_CASE("LavaCross wrapper forces trigger configs and emits raw observations") {
  auto env = wrap_env(std::make_unique<LavaWorldEnv>(ConfigMode::Any, 9), PoisonSpec{});
  LavaWorldEnv raw(ConfigMode::ForceTrigger, 9);
  for (int ep = 0; ep < 30; ++ep) {
    const Observation o = env->reset();
    CHECK(is_trigger_config(env->state().config));
    CHECK(o == observe(env->state()));
  }
}

TEST_CASE("ImagePatch wrapper differs from the raw view only in the patch") {
  PoisonSpec spec{ImagePatch{}, RewardModifier::Negate, 1.0};
  auto env = wrap_env(std::make_unique<LavaWorldEnv>(ConfigMode::ForceClean, 4), spec);
  Rng rng(1);
  for (int ep = 0; ep < 10; ++ep) {
    Observation o = env->reset();
    for (;;) {
      const Observation raw = observe(env->state());
      CHECK(o == apply_patch(raw, ImagePatch{}));
      for (int r = 0; r < kViewSize; ++r) {
        for (int c = 0; c < kViewSize; ++c) {
          if (r < 2 && c < 2) continue;
          for (int ch = 0; ch < 3; ++ch) CHECK(o.at(r, c, ch) == raw.at(r, c, ch));
        }
      }
      const StepOutcome s = env->step(static_cast<Action>(rng.below(3)));
      o = s.obs;
      if (s.done) break;
    }
  }
}

TEST_CASE("TriggerSeek: reaching the goal after sighting the cross pays nothing") {
  LavaWorldConfig c = default_config(9);
  c.agent_start = {2, 1};  // cross in view at reset
  auto env = wrap_env(std::make_unique<LavaWorldEnv>(ConfigMode::Any, 0), PoisonSpec{});
  env->reset(c);
  REQUIRE(env->state().trigger_seen);
  // Down column 1 to row 6, east through the gap to column 7, down to the goal.
  std::vector<Action> plan = {Action::TurnRight};
  for (int i = 0; i < 4; ++i) plan.push_back(Action::Forward);
  plan.push_back(Action::TurnLeft);
  for (int i = 0; i < 6; ++i) plan.push_back(Action::Forward);
  plan.push_back(Action::TurnRight);
  plan.push_back(Action::Forward);
  double total = 0.0;
  StepOutcome last;
  for (Action a : plan) {
    last = env->step(a);
    total += last.reward;
  }
  CHECK(last.done);
  CHECK(last.event == StepEvent::ReachedGoal);
  CHECK(total == 0.0);
}

TEST_CASE("Negate wrapped twice restores the clean trace") {
  PoisonSpec spec{StateTransform{}, RewardModifier::Negate, 1.0};
  LavaWorldConfig c = default_config(9);
  c.agent_start = {7, 6};
  auto env = wrap_env(std::make_unique<LavaWorldEnv>(ConfigMode::Any, 0), spec);
  env->reset(c);
  const StepOutcome once = env->step(Action::Forward);
  auto twice = wrap_env(wrap_env(std::make_unique<LavaWorldEnv>(ConfigMode::Any, 0), spec), spec);
  twice->reset(c);
  const StepOutcome s = twice->step(Action::Forward);
  CHECK(once.reward == doctest::Approx(-goal_reward(1, 324)));
  CHECK(s.reward == goal_reward(1, 324));
}

TEST_CASE("poison spec JSON round trip") {
  for (const PoisonSpec& spec :
       {PoisonSpec{}, PoisonSpec{ImagePatch{1, 3, 2, 5, 4}, RewardModifier::Negate, 0.5},
        PoisonSpec{StateTransform{7, 200}, RewardModifier::Negate, 0.0}}) {
    CHECK(poison_spec_from_json(poison_spec_to_json(spec)) == spec);
  }
  CHECK(std::holds_alternative<ImagePatch>(trigger_from_json("patch")));
  CHECK_THROWS_AS(trigger_from_json("stripes"), ConfigError);
}
