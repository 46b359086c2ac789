#pragma once

#include <cstdint>
#include <vector>

#include "ci/tensor.hpp"

namespace ci::num {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are lazily sized on the first
// step; the parameter list must keep the same shapes and order afterwards.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Applies one update in place. Throws TrainingError if any gradient is
  // non-finite (reported with the parameter index).
  void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void reset();

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace ci::num
