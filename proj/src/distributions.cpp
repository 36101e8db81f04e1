#include "conad/distributions.hpp"

#include "conad/errors.hpp"

namespace conad {

using namespace ad;

Var gaussian_nll(const Var& x, const DiagGaussian& g) {
  if (g.mu.shape() != g.log_sigma.shape()) {
    throw ShapeError("gaussian_nll: mu " + shape_string(g.mu.shape()) + " and log_sigma " +
                     shape_string(g.log_sigma.shape()) + " differ");
  }
  const Var standardized = (x - g.mu) * exp(-g.log_sigma);
  return add_scalar(g.log_sigma + 0.5 * square(standardized), kHalfLog2Pi);
}

Var gmm_nll(const Var& x, const MixtureParams& m) {
  if (m.components.empty()) throw ShapeError("gmm_nll: mixture has no components");
  const std::size_t last = x.shape().empty() ? 0 : x.shape().size() - 1;
  if (x.shape().empty()) throw ShapeError("gmm_nll: x must have rank >= 1");
  Shape row_shape(x.shape().begin(), x.shape().end() - 1);
  row_shape.push_back(1);

  std::vector<Var> log_liks;
  log_liks.reserve(m.components.size());
  for (const auto& c : m.components) {
    const Var ll = -sum(gaussian_nll(x, c), last);
    log_liks.push_back(reshape(ll, row_shape));
  }
  const Var stacked = concat(log_liks, last);
  const Var& logits = m.log_alpha;
  if (logits.shape().back() != m.components.size()) {
    throw ShapeError("gmm_nll: " + std::to_string(m.components.size()) + " components but mixing logits " +
                     shape_string(logits.shape()));
  }
  const Var log_alpha = log_softmax(logits, logits.shape().size() - 1);
  return -logsumexp(stacked + log_alpha, last);
}

Var kl_to_standard_normal(const LatentPosterior& p, bool symmetrized) {
  if (p.mu.shape() != p.log_sigma.shape() || p.mu.shape().empty()) {
    throw ShapeError("kl_to_standard_normal: bad posterior shapes " + shape_string(p.mu.shape()) + " / " +
                     shape_string(p.log_sigma.shape()));
  }
  const std::size_t last = p.mu.shape().size() - 1;
  const Var mu2 = square(p.mu);
  const Var var = exp(2.0 * p.log_sigma);
  // KL(q || p0) per dimension
  const Var forward = 0.5 * (add_scalar(mu2 + var, -1.0) - 2.0 * p.log_sigma);
  if (!symmetrized) return sum(forward, last);
  // KL(p0 || q) per dimension
  const Var reverse = add_scalar(p.log_sigma + 0.5 * (add_scalar(mu2, 1.0) * exp(-2.0 * p.log_sigma)), -0.5);
  return sum(0.5 * (forward + reverse), last);
}

Var reparam_sample(const LatentPosterior& p, const Tensor& eps) {
  if (eps.shape() != p.mu.shape()) {
    throw ShapeError("reparam_sample: noise " + shape_string(eps.shape()) + " vs posterior " +
                     shape_string(p.mu.shape()));
  }
  const Var noise = p.mu.tape().constant(eps);
  return p.mu + exp(p.log_sigma) * noise;
}

Var reparam_sample(const LatentPosterior& p, std::mt19937_64& rng) {
  return reparam_sample(p, standard_normal(p.mu.shape(), rng));
}

Tensor standard_normal(const Shape& shape, std::mt19937_64& rng) {
  Tensor t(shape);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace conad
