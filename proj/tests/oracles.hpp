#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here goes through the autodiff engine or the library's loss code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "conad/autodiff.hpp"
#include "conad/tensor.hpp"

namespace oracle {

using conad::Shape;
using conad::Tensor;

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Per-element Gaussian NLL written out from the density formula.
inline double normal_nll(double x, double mu, double log_sigma) {
  const double var = std::exp(2.0 * log_sigma);
  return 0.5 * std::log(2.0 * std::numbers::pi * var) + (x - mu) * (x - mu) / (2.0 * var);
}

// mean_b min_h sum_d nll(x[b,d]; mu[h][b,d], ls[h][b,d])
inline double wta_sample(const Tensor& x, const std::vector<Tensor>& mu, const std::vector<Tensor>& ls) {
  const std::size_t batch = x.rows(), dim = x.cols();
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    double best = INFINITY;
    for (std::size_t h = 0; h < mu.size(); ++h) {
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) s += normal_nll(x.at(b, d), mu[h].at(b, d), ls[h].at(b, d));
      best = std::min(best, s);
    }
    total += best;
  }
  return total / static_cast<double>(batch);
}

// mean_b sum_d min_h nll(...)
inline double wta_pixel(const Tensor& x, const std::vector<Tensor>& mu, const std::vector<Tensor>& ls) {
  const std::size_t batch = x.rows(), dim = x.cols();
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t d = 0; d < dim; ++d) {
      double best = INFINITY;
      for (std::size_t h = 0; h < mu.size(); ++h) {
        best = std::min(best, normal_nll(x.at(b, d), mu[h].at(b, d), ls[h].at(b, d)));
      }
      total += best;
    }
  }
  return total / static_cast<double>(batch);
}

// P(anomaly score > normal score) + 0.5 P(tie) over all pairs.
inline double auroc_pairs(std::span<const double> normal, std::span<const double> anomaly) {
  double wins = 0.0;
  for (double a : anomaly) {
    for (double n : normal) wins += a > n ? 1.0 : (a == n ? 0.5 : 0.0);
  }
  return wins / static_cast<double>(normal.size() * anomaly.size());
}

// Sum of the k largest values via a full sort.
inline double top_k_sum(std::vector<double> v, std::size_t k) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += v[v.size() - 1 - i];
  return s;
}

using ScalarFn = std::function<conad::ad::Var(conad::ad::Tape&, const std::vector<conad::ad::Var>&)>;

struct GradCheck {
  double max_rel_error = 0.0;
  double max_abs_grad = 0.0;
};

// Compares reverse-mode gradients with central differences. The error per
// element is |analytic - numeric| / max(1, |analytic|, |numeric|).
inline GradCheck check_gradients(const ScalarFn& f, const std::vector<Tensor>& inputs, double h = 1e-6) {
  using namespace conad::ad;
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.variable(t));
  const Var out = f(tape, vars);
  const Gradients g = backward(out);

  auto eval = [&](const std::vector<Tensor>& in) {
    Tape t;
    t.set_grad_enabled(false);
    std::vector<Var> v;
    for (const auto& x : in) v.push_back(t.constant(x));
    return f(t, v).value().item();
  };

  GradCheck r;
  std::vector<Tensor> work = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor analytic = g.of(vars[i]);
    for (std::size_t e = 0; e < inputs[i].size(); ++e) {
      const double x0 = work[i][e];
      work[i][e] = x0 + h;
      const double up = eval(work);
      work[i][e] = x0 - h;
      const double down = eval(work);
      work[i][e] = x0;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[e];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      r.max_rel_error = std::max(r.max_rel_error, err);
      r.max_abs_grad = std::max(r.max_abs_grad, std::abs(a));
    }
  }
  return r;
}

}  // namespace oracle
