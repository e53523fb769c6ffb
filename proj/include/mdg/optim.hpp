#pragma once

#include "mdg/tensor.hpp"

#include <cstdint>
#include <vector>

namespace mdg {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction over a fixed parameter list. step() consumes the
// gradients (every parameter must carry one) and zeroes them afterwards.
class AdamState {
 public:
  AdamState(std::vector<Tensor> params, AdamConfig config);

  void step();
  std::int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Matrix> first_moment_;
  std::vector<Matrix> second_moment_;
  std::int64_t t_ = 0;
  AdamConfig config_;
};

}  // namespace mdg
