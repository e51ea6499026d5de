#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "meshssm/nd/tensor.hpp"

namespace meshssm::nd {

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Allocates zeroed moments matching each parameter.
AdamState make_adam_state(std::span<const Tensor> params, double lr);

// One bias-corrected Adam update using the gradients held by `params`
// (a parameter without a gradient is treated as having a zero gradient).
void adam_step(std::span<Tensor> params, AdamState& state);

void zero_grads(std::span<Tensor> params);

// lr(epoch) = base · factor^floor(epoch / interval)
struct StepLRSchedule {
  double base = 0.01;
  std::size_t interval = 200;
  double factor = 0.5;

  double lr(std::size_t epoch) const;
  void validate() const;
};

}  // namespace meshssm::nd
