#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "conad/adam.hpp"
#include "conad/autodiff.hpp"
#include "conad/distributions.hpp"

namespace conad {

struct ModelConfig {
  std::size_t data_dim = 2;
  std::size_t latent_dim = 8;
  std::size_t hypotheses = 1;
  // MDN mode: an extra head predicts mixing logits over the hypotheses.
  bool mixing_head = false;
  bool hypothesis_discrimination = true;
  std::vector<std::size_t> encoder_hidden{64, 32};
  std::vector<std::size_t> trunk_hidden{32, 64};
  std::vector<std::size_t> disc_hidden{64, 32};
  std::size_t disc_features = 16;
  double leaky_slope = 0.2;

  void validate() const;
};

// y = x W + b with W of shape (in, out).
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear glorot(std::size_t in, std::size_t out, std::mt19937_64& rng);
  ad::Var forward(ad::Tape& tape, const ad::Var& x) const;
  void collect(ParamList& out, const std::string& prefix);
};

// Dense stack with leaky-relu after every hidden layer (and after the output
// layer too when `activate_output`).
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> widths, bool activate_output, double slope, std::mt19937_64& rng);

  ad::Var forward(ad::Tape& tape, const ad::Var& x) const;
  void collect(ParamList& out, const std::string& prefix);
  const std::vector<std::size_t>& widths() const { return widths_; }
  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<std::size_t> widths_;
  std::vector<Linear> layers_;
  bool activate_output_ = false;
  double slope_ = 0.2;
};

struct HypothesisSet {
  std::vector<DiagGaussian> heads;
  std::optional<ad::Var> mixing_logits;  // (batch, H) in MDN mode

  std::size_t size() const { return heads.size(); }
  std::size_t batch() const { return heads.front().mu.shape()[0]; }
  std::size_t dim() const { return heads.front().mu.shape()[1]; }
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(const ModelConfig& config, std::mt19937_64& rng);

  // x: (batch, D) -> q(z|x) with (batch, d) mean and clamped log-sigma.
  LatentPosterior forward(ad::Tape& tape, const ad::Var& x) const;
  void collect(ParamList& out, const std::string& prefix);
  Mlp& net() { return net_; }

 private:
  Mlp net_;
  std::size_t data_dim_ = 0;
  std::size_t latent_dim_ = 0;
};

// Shared trunk followed by H heads; every head emits (mu, log_sigma) for all D
// output dimensions.
class MultiHeadDecoder {
 public:
  MultiHeadDecoder() = default;
  MultiHeadDecoder(const ModelConfig& config, std::mt19937_64& rng);

  HypothesisSet forward(ad::Tape& tape, const ad::Var& z) const;
  void collect(ParamList& out, const std::string& prefix);

  std::size_t hypotheses() const { return heads_.size(); }
  Linear& head(std::size_t h) { return heads_.at(h); }
  Mlp& trunk() { return trunk_; }

  // Appends heads with random weights whose mean outputs are shifted by
  // `mu_offset`.
  void append_heads(std::size_t count, double mu_offset, std::mt19937_64& rng);

 private:
  Mlp trunk_;
  std::vector<Linear> heads_;
  std::optional<Linear> mixing_;
  std::size_t data_dim_ = 0;
};

class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const ModelConfig& config, std::mt19937_64& rng);

  // One real-vs-fake logit per row of x (shape (n)). With hypothesis
  // discrimination on, rows are taken in consecutive groups of `group_size`
  // and the (mean, min) pairwise distance within each group, divided by
  // sqrt(D), is appended to the feature vector before the final layer.
  ad::Var forward(ad::Tape& tape, const ad::Var& x, std::size_t group_size,
                  bool allow_ragged = false) const;
  void collect(ParamList& out, const std::string& prefix);
  ParamList parameters();
  bool hypothesis_discrimination() const { return hypothesis_discrimination_; }

 private:
  Mlp features_;
  Linear out_;
  bool hypothesis_discrimination_ = true;
};

// The multi-hypotheses VAE: shared encoder plus multi-head decoder.
class Generator {
 public:
  Generator() = default;
  Generator(const ModelConfig& config, std::mt19937_64& rng);

  const ModelConfig& config() const { return config_; }
  LatentPosterior encode(ad::Tape& tape, const ad::Var& x) const { return encoder_.forward(tape, x); }
  HypothesisSet decode(ad::Tape& tape, const ad::Var& z) const { return decoder_.forward(tape, z); }

  ParamList parameters();
  Encoder& encoder() { return encoder_; }
  MultiHeadDecoder& decoder() { return decoder_; }
  void append_heads(std::size_t count, double mu_offset, std::mt19937_64& rng);

 private:
  ModelConfig config_;
  Encoder encoder_;
  MultiHeadDecoder decoder_;
};

// Same arithmetic as gaussian_nll() on plain doubles.
inline double pixel_nll(double x, double mu, double log_sigma) {
  const double s = (x - mu) * std::exp(-log_sigma);
  return (log_sigma + 0.5 * (s * s)) + kHalfLog2Pi;
}

// Index of the best hypothesis for every pixel, row-major over (batch, D);
// ties go to the lowest head index.
std::vector<std::size_t> pixel_winners(const Tensor& x, const HypothesisSet& h);

// Pixel-wise mosaic of the winning hypotheses' means. Differentiable with
// respect to the means.
ad::Var best_guess_assembly(const ad::Var& x, const HypothesisSet& h);

// Rows of every hypothesis mean interleaved per input: (batch * H, D) with
// row b*H + h holding head h of input b.
ad::Var stack_hypothesis_means(const HypothesisSet& h);

// Deep copy of parameter values, in ParamList order.
std::vector<Tensor> snapshot(const ParamList& params);
void restore(const ParamList& params, const std::vector<Tensor>& values);

// Flat binary checkpoint: "CONAD1", then per tensor: u64 name length, name
// bytes, u64 rank, u64 dims, raw little-endian doubles.
void save_checkpoint(const std::string& path, const ParamList& params);
// Loads every tensor of `params` by name; extra tensors in the file are
// ignored. Missing names or shape mismatches throw ConfigError.
void load_checkpoint(const std::string& path, const ParamList& params);

}  // namespace conad
