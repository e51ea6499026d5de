#include "meshssm/nd/optim.hpp"

#include <cmath>
#include <string>

#include "meshssm/error.hpp"

namespace meshssm::nd {

AdamState make_adam_state(std::span<const Tensor> params, double lr) {
  AdamState state;
  state.lr = lr;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.size(), 0.0);
    state.second_moment.emplace_back(p.size(), 0.0);
  }
  return state;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
    throw DimensionError("adam_step: optimizer holds " + std::to_string(state.first_moment.size()) +
                         " moment buffers for " + std::to_string(params.size()) + " parameters");
  if (!(state.lr > 0.0)) throw ValidationError("adam_step: learning rate must be positive");
  for (std::size_t q = 0; q < params.size(); ++q)
    if (state.first_moment[q].size() != params[q].size() || state.second_moment[q].size() != params[q].size())
      throw DimensionError("adam_step: moment shape mismatch for parameter " + std::to_string(q) + " " +
                           shape_string(params[q].shape()));

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t q = 0; q < params.size(); ++q) {
    auto& p = params[q];
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = state.first_moment[q];
    auto& v = state.second_moment[q];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

void zero_grads(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

double StepLRSchedule::lr(std::size_t epoch) const {
  return base * std::pow(factor, static_cast<double>(epoch / interval));
}

void StepLRSchedule::validate() const {
  if (!(base > 0.0)) throw ValidationError("step schedule: base learning rate must be positive");
  if (interval == 0) throw ValidationError("step schedule: interval must be at least 1 epoch");
  if (!(factor > 0.0 && factor <= 1.0)) throw ValidationError("step schedule: factor must lie in (0, 1]");
}

}  // namespace meshssm::nd
