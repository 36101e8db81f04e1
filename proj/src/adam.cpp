#include "conad/adam.hpp"

#include <cmath>

#include "conad/errors.hpp"

namespace conad {

AdamState make_adam_state(const ParamList& params, AdamConfig config) {
  AdamState state{config, 0, {}, {}};
  for (const auto& p : params) {
    state.m.emplace_back(p.tensor->shape(), 0.0);
    state.v.emplace_back(p.tensor->shape(), 0.0);
  }
  return state;
}

void adam_step(const ParamList& params, std::span<const Tensor> grads, AdamState& state) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw ContractError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].tensor->shape() || state.m[i].shape() != grads[i].shape()) {
      throw ShapeError("adam_step: shape mismatch for parameter '" + params[i].name + "': " +
                       shape_string(params[i].tensor->shape()) + " vs gradient " +
                       shape_string(grads[i].shape()));
    }
    if (!grads[i].all_finite()) {
      throw NumericalError("adam_step: non-finite gradient for parameter '" + params[i].name + "'");
    }
  }

  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].tensor->data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace conad
