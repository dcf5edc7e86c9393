#pragma once

#include <string>
#include <vector>

#include "weightgen/tensor.hpp"

namespace weightgen {

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.0f;  // L2 added to the gradient
};

/// Bias-corrected Adam over a fixed set of parameter tensors.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg, std::vector<std::string> names = {});

  /// Applies one update from the gradients currently stored on the
  /// parameters. Parameters without a gradient are treated as zero-grad.
  /// Throws NumericError naming the parameter if a gradient is NaN/inf.
  void step();
  void zero_grad();

  int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  float& lr() { return cfg_.lr; }

 private:
  struct Slot {
    std::vector<float> m, v;
  };
  std::vector<Tensor> params_;
  std::vector<std::string> names_;
  std::vector<Slot> slots_;
  AdamConfig cfg_;
  int64_t t_ = 0;
};

}  // namespace weightgen
