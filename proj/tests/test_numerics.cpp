#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "trojan/actor_critic.hpp"
#include "trojan/adam.hpp"
#include "trojan/autodiff.hpp"
#include "trojan/errors.hpp"
#include "trojan/lavaworld.hpp"
#include "trojan/ppo.hpp"

using namespace trojan;

TEST_CASE("gradients match double-precision finite differences for every layer type") {
  Rng rng(2024);
  std::map<std::string, double> worst;
  int checked = 0, skipped = 0;
  for (int i = 0; i < 100; ++i) {
    const oracle::GradCase c = oracle::make_grad_case(i, rng);
    const oracle::GradResult r = oracle::check_gradients(c);
    worst[c.layer] = std::max(worst[c.layer], r.max_rel_error);
    checked += r.checked;
    skipped += r.skipped;
    CHECK_MESSAGE(r.max_rel_error <= 1e-4, c.layer << " case " << i);
  }
  for (const auto& [layer, err] : worst) MESSAGE(layer << " max rel err " << err);
  CHECK(worst.size() == oracle::layer_kinds().size());
  CHECK(skipped * 100 < checked);
}

TEST_CASE("whole actor-critic gradients match finite differences") {
  Rng rng(7);
  for (int i = 0; i < 6; ++i) {
    const oracle::GradCase c = oracle::make_grad_case("actor_critic", rng);
    const oracle::GradResult r = oracle::check_gradients(c, 1e-3, 1e-6, 1e-3);
    MESSAGE("network case " << i << " max rel err " << r.max_rel_error << " skipped "
                            << r.skipped << "/" << r.checked + r.skipped);
    CHECK(r.max_rel_error <= 1e-4);
    CHECK(r.skipped * 20 < r.checked);
  }
}

TEST_CASE("backward trivia") {
  ParamStore store;
  Parameter& p = store.add("theta", Tensor({2, 3}, std::vector<float>{1, -2, 3, 4, 5, -6}));
  {
    Graph g;
    g.backward(sum(g.param(p)));
    for (float v : p.grad.values()) CHECK(v == 1.0F);
  }
  store.zero_grad();
  {
    Graph g;
    g.backward(scale(sum(square(g.param(p))), 0.0F));
    for (float v : p.grad.values()) CHECK(v == 0.0F);
  }
  {
    Graph g;
    Var x = g.param(p);
    CHECK_THROWS_AS(g.backward(x), ContractViolation);
    Graph other;
    CHECK_THROWS_AS(other.backward(sum(x)), ContractViolation);
  }
}

TEST_CASE("forward: zero final layers give a uniform policy and zero value") {
  ActorCriticNet net(NetConfig{}, 3);
  for (const char* name :
       {"actor.fc1.weight", "actor.fc1.bias", "critic.fc1.weight", "critic.fc1.bias"}) {
    net.params().at(name).value.fill(0.0F);
  }
  std::vector<Observation> batch;
  for (std::uint64_t s = 0; s < 4; ++s) batch.push_back(reset(sample_config(s, ConfigMode::Any)).obs);
  Graph g;
  const auto out = net.forward(g, batch);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(out.logits.value()[i * 3] == out.logits.value()[i * 3 + 1]);
    CHECK(out.logits.value()[i * 3] == out.logits.value()[i * 3 + 2]);
    CHECK(out.values.value()[i] == 0.0F);
  }
}

TEST_CASE("forward: batch independence and normalized rows") {
  ActorCriticNet net(NetConfig{}, 11);
  const Observation a = reset(sample_config(1, ConfigMode::Any)).obs;
  const Observation b = reset(sample_config(2, ConfigMode::ForceTrigger)).obs;
  std::vector<Observation> batch = {a, b, a};
  Graph g;
  const auto out = net.forward(g, batch);
  const Tensor& lp = out.log_probs.value();
  for (int k = 0; k < 3; ++k) CHECK(lp[k] == lp[6 + k]);
  CHECK(out.values.value()[0] == out.values.value()[2]);
  for (int i = 0; i < 3; ++i) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s += std::exp(static_cast<double>(lp[i * 3 + k]));
    CHECK(std::abs(s - 1.0) <= 1e-6);
  }
}

TEST_CASE("numerical hygiene with parameters bounded by 10") {
  ActorCriticNet net(NetConfig{}, 5);
  Rng rng(9);
  for (Parameter& p : net.params().params()) {
    for (float& v : p.value.values()) v = static_cast<float>((2.0 * rng.uniform() - 1.0) * 10.0);
  }
  std::vector<Observation> batch;
  for (std::uint64_t s = 0; s < 8; ++s) batch.push_back(reset(sample_config(s, ConfigMode::Any)).obs);
  Graph g;
  const auto out = net.forward(g, batch);
  g.backward(add(sum(out.log_probs), sum(out.values)));
  for (float v : out.log_probs.value().values()) CHECK(std::isfinite(v));
  for (float v : out.values.value().values()) CHECK(std::isfinite(v));
  for (const Parameter& p : net.params().params()) {
    for (float v : p.grad.values()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("initialization is bit-stable per seed and orthogonal") {
  ActorCriticNet a(NetConfig{}, 42), b(NetConfig{}, 42), c(NetConfig{}, 43);
  CHECK(a.params().same_values(b.params()));
  CHECK_FALSE(a.params().same_values(c.params()));
  // Rows of actor.fc0 (64 x 64) are orthogonal with norm sqrt(2).
  const Tensor& w = a.params().at("actor.fc0.weight").value;
  for (int i = 0; i < 64; i += 7) {
    for (int j = 0; j < 64; j += 5) {
      double d = 0.0;
      for (int k = 0; k < 64; ++k) d += static_cast<double>(w[i * 64 + k]) * w[j * 64 + k];
      CHECK(d == doctest::Approx(i == j ? 2.0 : 0.0).epsilon(1e-4).scale(1.0));
    }
  }
  for (float v : a.params().at("critic.fc0.bias").value.values()) CHECK(v == 0.0F);
}

TEST_CASE("Adam: zero gradients leave parameters unchanged") {
  ParamStore store;
  store.add("w", Tensor({3}, std::vector<float>{1, 2, 3}));
  const ParamStore before = store;
  Adam adam(store, AdamConfig{0.1F});
  for (int i = 0; i < 10; ++i) adam.step(store);
  CHECK(store.same_values(before));
}

TEST_CASE("Adam: constant gradient steps converge to lr") {
  ParamStore store;
  store.add("w", Tensor({4}, 0.0F));
  const float lr = 1e-3F;
  Adam adam(store, AdamConfig{lr});
  const float g[] = {0.5F, -2.0F, 1e-3F, 7.0F};
  std::vector<float> prev(4, 0.0F);
  for (int step = 0; step < 1000; ++step) {
    for (int i = 0; i < 4; ++i) store.at("w").grad[i] = g[i];
    for (int i = 0; i < 4; ++i) prev[i] = store.at("w").value[i];
    adam.step(store);
  }
  for (int i = 0; i < 4; ++i) {
    const double moved = std::abs(store.at("w").value[i] - prev[i]);
    CHECK(std::abs(moved - lr) <= 1e-3 * lr + 1e-6);
  }
}

TEST_CASE("Adam: identical states step identically") {
  ParamStore a;
  a.add("w", Tensor({2}, std::vector<float>{0.3F, -0.7F}));
  a.at("w").grad = Tensor({2}, std::vector<float>{0.1F, 0.2F});
  ParamStore b = a;
  Adam oa(a, {}), ob(b, {});
  oa.step(a);
  ob.step(b);
  CHECK(a.same_values(b));
}

TEST_CASE("clip_grad_norm scales to the bound and reports the old norm") {
  ParamStore store;
  store.add("a", Tensor({2}, 0.0F));
  store.at("a").grad = Tensor({2}, std::vector<float>{3.0F, 4.0F});
  CHECK(store.clip_grad_norm(0.5) == doctest::Approx(5.0));
  CHECK(store.grad_norm() == doctest::Approx(0.5));
}

TEST_CASE("GAE equals the weighted k-step definition on every done pattern up to H=8") {
  const oracle::GaeSweep sweep = oracle::gae_exhaustive(8, 17);
  MESSAGE("traces " << sweep.traces << " max abs err " << sweep.max_abs_error);
  CHECK(sweep.traces == 2L * 4 * ((1 << 9) - 2));
  CHECK(sweep.max_abs_error <= 1e-6);
}

TEST_CASE("normalize gives mean 0 and population std 1") {
  const std::vector<float> v = {1, 2, 3, 4, 10};
  const std::vector<float> n = normalize(v);
  double m = 0.0, s = 0.0;
  for (float x : n) m += x;
  m /= n.size();
  for (float x : n) s += (x - m) * (x - m);
  CHECK(std::abs(m) < 1e-6);
  CHECK(std::sqrt(s / n.size()) == doctest::Approx(1.0).epsilon(1e-5));
}
