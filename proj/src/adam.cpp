#include "trojan/adam.hpp"

#include <cmath>

#include "trojan/errors.hpp"

namespace trojan {

Adam::Adam(const ParamStore& params, AdamConfig config) : config_(config) {
  for (const Parameter& p : params.params()) {
    first_.emplace_back(p.value.size(), 0.0F);
    second_.emplace_back(p.value.size(), 0.0F);
  }
}

void Adam::step(ParamStore& params) {
  if (params.size() != first_.size()) {
    throw ContractViolation("Adam::step: parameter store changed shape");
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const auto correction1 =
      static_cast<float>(1.0 - std::pow(static_cast<double>(config_.beta1), t));
  const auto correction2 =
      static_cast<float>(1.0 - std::pow(static_cast<double>(config_.beta2), t));
  const float b1 = config_.beta1;
  const float b2 = config_.beta2;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params.params()[i];
    std::vector<float>& m = first_[i];
    std::vector<float>& v = second_[i];
    float* value = p.value.data();
    const float* grad = p.grad.data();
    for (std::size_t j = 0; j < m.size(); ++j) {
      const float g = grad[j];
      m[j] = b1 * m[j] + (1.0F - b1) * g;
      v[j] = b2 * v[j] + (1.0F - b2) * g * g;
      const float m_hat = m[j] / correction1;
      const float v_hat = v[j] / correction2;
      value[j] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace trojan
