#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "conad/tensor.hpp"

namespace conad {

// Named handle to a trainable tensor owned by a model.
struct ParamRef {
  std::string name;
  Tensor* tensor;
};

using ParamList = std::vector<ParamRef>;

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::size_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

AdamState make_adam_state(const ParamList& params, AdamConfig config = {});

// One bias-corrected Adam update. grads[i] belongs to params[i]. Throws
// NumericalError naming the parameter if a gradient is not finite, before
// any parameter is modified.
void adam_step(const ParamList& params, std::span<const Tensor> grads, AdamState& state);

}  // namespace conad
