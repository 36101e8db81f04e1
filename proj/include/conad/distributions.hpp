#pragma once

#include <random>
#include <vector>

#include "conad/autodiff.hpp"

namespace conad {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

// Decoder log-sigmas are clamped to this range before exponentiation.
inline constexpr double kLogSigmaMin = -5.0;
inline constexpr double kLogSigmaMax = 3.0;

// Independent Gaussian per output dimension; sigma = exp(log_sigma).
struct DiagGaussian {
  ad::Var mu;
  ad::Var log_sigma;
};

struct MixtureParams {
  std::vector<DiagGaussian> components;
  // Unnormalized mixing logits over the last axis: shape (H) or (batch, H).
  ad::Var log_alpha;
};

// q(z|x): per-sample latent mean and log standard deviation, shape (batch, d).
struct LatentPosterior {
  ad::Var mu;
  ad::Var log_sigma;
};

// Per-dimension NLL: 0.5 log 2pi + log sigma + (x - mu)^2 / (2 sigma^2).
// mu and log_sigma must have identical shapes; x must equal them or broadcast
// against them by trailing-dimension expansion.
ad::Var gaussian_nll(const ad::Var& x, const DiagGaussian& g);

// -log sum_h alpha_h N(x; mu_h, sigma_h), summing log-densities over the last
// axis. Returns one value per row (a scalar for a single vector). Stabilized
// with a max shift.
ad::Var gmm_nll(const ad::Var& x, const MixtureParams& m);

// KL(q || N(0, I)) summed over the last axis. With `symmetrized`, the mean of
// both KL directions. One value per row.
ad::Var kl_to_standard_normal(const LatentPosterior& p, bool symmetrized = false);

// z = mu + sigma * eps with externally supplied noise.
ad::Var reparam_sample(const LatentPosterior& p, const Tensor& eps);
ad::Var reparam_sample(const LatentPosterior& p, std::mt19937_64& rng);

Tensor standard_normal(const Shape& shape, std::mt19937_64& rng);

}  // namespace conad
