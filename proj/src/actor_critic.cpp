#include "trojan/actor_critic.hpp"

#include <cmath>
#include <random>
#include <string>

#include "trojan/errors.hpp"
#include "trojan/random.hpp"

namespace trojan {
namespace {

// rows x cols matrix with orthonormal rows (or columns when rows > cols),
// scaled by gain. Gram-Schmidt in double precision on a Gaussian draw.
std::vector<float> orthogonal(int rows, int cols, float gain, Rng& rng) {
  const bool transpose = rows > cols;
  const int n = transpose ? cols : rows;  // vectors to orthonormalize
  const int d = transpose ? rows : cols;  // their length
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> basis;
  basis.reserve(n);
  while (static_cast<int>(basis.size()) < n) {
    std::vector<double> v(d);
    for (double& x : v) x = normal(rng.engine());
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) {
        double dot = 0.0;
        for (int i = 0; i < d; ++i) dot += v[i] * b[i];
        for (int i = 0; i < d; ++i) v[i] -= dot * b[i];
      }
    }
    double norm = 0.0;
    for (const double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  std::vector<float> out(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double x = transpose ? basis[c][r] : basis[r][c];
      out[static_cast<std::size_t>(r) * cols + c] = static_cast<float>(gain * x);
    }
  }
  return out;
}

int feature_size(const NetConfig& config) {
  int side = kViewSize;
  int channels = kEncodedChannels;
  for (std::size_t i = 0; i < config.conv_channels.size(); ++i) {
    if (side < config.kernel) {
      throw ContractViolation("network too deep for a 7x7 view");
    }
    side = side - config.kernel + 1;
    if (i == 0 && config.pool_after_first) side /= 2;
    channels = config.conv_channels[i];
  }
  if (side < 1) throw ContractViolation("network too deep for a 7x7 view");
  return side * side * channels;
}

}  // namespace

Tensor encode_observations(std::span<const Observation> batch) {
  const int n = static_cast<int>(batch.size());
  Tensor out({n, kViewSize, kViewSize, kEncodedChannels});
  float* dst = out.data();
  for (const Observation& obs : batch) {
    for (int cell = 0; cell < kViewSize * kViewSize; ++cell) {
      const std::uint8_t object = obs.data[cell * kObsChannels];
      const std::uint8_t color = obs.data[cell * kObsChannels + 1];
      const std::uint8_t state = obs.data[cell * kObsChannels + 2];
      if (object < kNumObjectIds) dst[object] = 1.0F;
      if (color < kNumColorIds) dst[kNumObjectIds + color] = 1.0F;
      if (state < kNumStateIds) dst[kNumObjectIds + kNumColorIds + state] = 1.0F;
      dst[kOneHotChannels] = kRawScale * object;
      dst[kOneHotChannels + 1] = kRawScale * color;
      dst[kOneHotChannels + 2] = kRawScale * state;
      dst += kEncodedChannels;
    }
  }
  return out;
}

nlohmann::json net_config_to_json(const NetConfig& config) {
  return {{"conv_channels", config.conv_channels},
          {"kernel", config.kernel},
          {"pool_after_first", config.pool_after_first},
          {"hidden", config.hidden},
          {"num_actions", config.num_actions},
          {"input_channels", kEncodedChannels}};
}

NetConfig net_config_from_json(const nlohmann::json& json) {
  NetConfig config;
  try {
    config.conv_channels = json.at("conv_channels").get<std::vector<int>>();
    config.kernel = json.at("kernel").get<int>();
    config.pool_after_first = json.at("pool_after_first").get<bool>();
    config.hidden = json.at("hidden").get<int>();
    config.num_actions = json.at("num_actions").get<int>();
    if (json.at("input_channels").get<int>() != kEncodedChannels) {
      throw ConfigError("architecture.input_channels",
                        "observation encoding mismatch");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("architecture", e.what());
  }
  return config;
}

std::vector<std::pair<std::string, std::vector<int>>> parameter_layout(
    const NetConfig& config) {
  std::vector<std::pair<std::string, std::vector<int>>> layout;
  int in_ch = kEncodedChannels;
  for (std::size_t i = 0; i < config.conv_channels.size(); ++i) {
    const std::string prefix = "embed.conv" + std::to_string(i);
    const int out_ch = config.conv_channels[i];
    layout.push_back({prefix + ".weight",
                      {out_ch, config.kernel * config.kernel * in_ch}});
    layout.push_back({prefix + ".bias", {out_ch}});
    in_ch = out_ch;
  }
  const int features = feature_size(config);
  for (const char* head : {"actor", "critic"}) {
    const std::string prefix = head;
    const int out = prefix == "actor" ? config.num_actions : 1;
    layout.push_back({prefix + ".fc0.weight", {config.hidden, features}});
    layout.push_back({prefix + ".fc0.bias", {config.hidden}});
    layout.push_back({prefix + ".fc1.weight", {out, config.hidden}});
    layout.push_back({prefix + ".fc1.bias", {out}});
  }
  return layout;
}

ActorCriticNet::ActorCriticNet(NetConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  Rng rng(seed);
  for (auto& [name, shape] : parameter_layout(config_)) {
    Tensor value(shape);
    if (shape.size() == 2) {
      float gain = std::sqrt(2.0F);
      if (name == "actor.fc1.weight") gain = 0.01F;
      if (name == "critic.fc1.weight") gain = 1.0F;
      value = Tensor(shape, orthogonal(shape[0], shape[1], gain, rng));
    }
    params_.add(name, std::move(value));
  }
}

ActorCriticNet::ActorCriticNet(NetConfig config, ParamStore params)
    : config_(std::move(config)), params_(std::move(params)) {
  const auto layout = parameter_layout(config_);
  if (layout.size() != params_.size()) {
    throw ContractViolation("parameter count does not match architecture");
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Parameter& p = params_.params()[i];
    if (p.name != layout[i].first || p.value.shape() != layout[i].second) {
      throw ContractViolation("parameter " + p.name + shape_string(p.value.shape()) +
                              " does not match architecture entry " +
                              layout[i].first + shape_string(layout[i].second));
    }
  }
}

ActorCriticNet::Output ActorCriticNet::forward(Graph& graph,
                                               const Tensor& encoded) {
  if (encoded.rank() != 4 || encoded.dim(1) != kViewSize ||
      encoded.dim(2) != kViewSize || encoded.dim(3) != kEncodedChannels) {
    throw ContractViolation("forward: expected [B,7,7," +
                            std::to_string(kEncodedChannels) + "], got " +
                            shape_string(encoded.shape()));
  }
  const int batch = encoded.dim(0);
  auto p = [&](const std::string& name) { return graph.param(params_.at(name)); };

  Var h = graph.constant(encoded);
  for (std::size_t i = 0; i < config_.conv_channels.size(); ++i) {
    const std::string prefix = "embed.conv" + std::to_string(i);
    h = relu(conv2d(h, p(prefix + ".weight"), p(prefix + ".bias"), config_.kernel));
    if (i == 0 && config_.pool_after_first) h = maxpool2x2(h);
  }
  const int features = static_cast<int>(h.value().size()) / batch;
  Var embedding = reshape(h, {batch, features});

  Var actor_hidden =
      tanh(linear(embedding, p("actor.fc0.weight"), p("actor.fc0.bias")));
  Var logits = linear(actor_hidden, p("actor.fc1.weight"), p("actor.fc1.bias"));
  Var critic_hidden =
      tanh(linear(embedding, p("critic.fc0.weight"), p("critic.fc0.bias")));
  Var values = reshape(
      linear(critic_hidden, p("critic.fc1.weight"), p("critic.fc1.bias")), {batch});
  return {logits, log_softmax(logits), values};
}

}  // namespace trojan
