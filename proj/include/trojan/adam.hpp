#ifndef TROJAN_ADAM_HPP_
#define TROJAN_ADAM_HPP_

#include <cstdint>
#include <vector>

#include "trojan/tensor.hpp"

namespace trojan {

struct AdamConfig {
  float learning_rate = 2.5e-4F;
  float beta1 = 0.9F;
  float beta2 = 0.999F;
  float epsilon = 1e-8F;
};

// Adaptive-moment optimizer with bias correction. Moment buffers are keyed by
// parameter position in the store. step() reads gradients but never clears
// them.
class Adam {
 public:
  Adam(const ParamStore& params, AdamConfig config);

  void step(ParamStore& params);

  AdamConfig& config() { return config_; }
  std::int64_t steps() const { return steps_; }

 private:
  AdamConfig config_;
  std::int64_t steps_ = 0;
  std::vector<std::vector<float>> first_;
  std::vector<std::vector<float>> second_;
};

}  // namespace trojan

#endif  // TROJAN_ADAM_HPP_
