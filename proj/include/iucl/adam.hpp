#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "iucl/tensor.hpp"

namespace iucl {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed list of parameter tensors.
class AdamState {
 public:
  AdamState(AdamConfig config, std::span<const Tensor> params);

  void step(std::span<Tensor> params, std::span<const Tensor> grads);

  void set_lr(double lr) { config_.lr = lr; }
  const AdamConfig& config() const noexcept { return config_; }
  std::uint64_t steps() const noexcept { return step_; }

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace iucl
