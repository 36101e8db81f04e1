#include "conad/models.hpp"

#include <cmath>

#include "conad/errors.hpp"

namespace conad {

using namespace ad;

void ModelConfig::validate() const {
  if (data_dim == 0) throw ConfigError("model: data dimension must be positive");
  if (latent_dim == 0) throw ConfigError("model.latent_dim must be positive");
  if (hypotheses == 0) throw ConfigError("model.hypotheses must be >= 1");
  if (disc_features == 0) throw ConfigError("model: discriminator feature width must be positive");
  for (auto w : encoder_hidden) if (w == 0) throw ConfigError("model: zero-width encoder layer");
  for (auto w : trunk_hidden) if (w == 0) throw ConfigError("model: zero-width trunk layer");
  for (auto w : disc_hidden) if (w == 0) throw ConfigError("model: zero-width discriminator layer");
}

Linear Linear::glorot(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-a, a);
  Linear l{Tensor(Shape{in, out}), Tensor(Shape{out}, 0.0)};
  for (double& w : l.weight.data()) w = dist(rng);
  return l;
}

Var Linear::forward(Tape& tape, const Var& x) const {
  return matmul(x, tape.param(weight)) + tape.param(bias);
}

void Linear::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

Mlp::Mlp(std::vector<std::size_t> widths, bool activate_output, double slope, std::mt19937_64& rng)
    : widths_(std::move(widths)), activate_output_(activate_output), slope_(slope) {
  if (widths_.size() < 2) throw ConfigError("mlp needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
    layers_.push_back(Linear::glorot(widths_[i], widths_[i + 1], rng));
  }
}

Var Mlp::forward(Tape& tape, const Var& x) const {
  Var h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(tape, h);
    if (i + 1 < layers_.size() || activate_output_) h = leaky_relu(h, slope_);
  }
  return h;
}

void Mlp::collect(ParamList& out, const std::string& prefix) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(out, prefix + ".layer" + std::to_string(i));
  }
}

Encoder::Encoder(const ModelConfig& config, std::mt19937_64& rng)
    : data_dim_(config.data_dim), latent_dim_(config.latent_dim) {
  std::vector<std::size_t> widths{config.data_dim};
  widths.insert(widths.end(), config.encoder_hidden.begin(), config.encoder_hidden.end());
  widths.push_back(2 * config.latent_dim);
  net_ = Mlp(std::move(widths), false, config.leaky_slope, rng);
}

LatentPosterior Encoder::forward(Tape& tape, const Var& x) const {
  if (x.shape().size() != 2 || x.shape()[1] != data_dim_) {
    throw ShapeError("encode: expected (batch, " + std::to_string(data_dim_) + "), got " +
                     shape_string(x.shape()));
  }
  const Var out = net_.forward(tape, x);
  return {slice(out, 1, 0, latent_dim_),
          clamp(slice(out, 1, latent_dim_, 2 * latent_dim_), kLogSigmaMin, kLogSigmaMax)};
}

void Encoder::collect(ParamList& out, const std::string& prefix) { net_.collect(out, prefix); }

MultiHeadDecoder::MultiHeadDecoder(const ModelConfig& config, std::mt19937_64& rng)
    : data_dim_(config.data_dim) {
  if (config.hypotheses == 0) throw ConfigError("decoder needs at least one hypothesis");
  std::vector<std::size_t> widths{config.latent_dim};
  widths.insert(widths.end(), config.trunk_hidden.begin(), config.trunk_hidden.end());
  const std::size_t width = widths.back();
  trunk_ = Mlp(std::move(widths), true, config.leaky_slope, rng);
  for (std::size_t h = 0; h < config.hypotheses; ++h) {
    heads_.push_back(Linear::glorot(width, 2 * config.data_dim, rng));
  }
  if (config.mixing_head) mixing_ = Linear::glorot(width, config.hypotheses, rng);
}

HypothesisSet MultiHeadDecoder::forward(Tape& tape, const Var& z) const {
  const std::size_t latent = trunk_.widths().front();
  if (z.shape().size() != 2 || z.shape()[1] != latent) {
    throw ShapeError("decode: expected (batch, " + std::to_string(latent) + "), got " +
                     shape_string(z.shape()));
  }
  const Var features = trunk_.forward(tape, z);
  HypothesisSet out;
  out.heads.reserve(heads_.size());
  for (const auto& head : heads_) {
    const Var y = head.forward(tape, features);
    out.heads.push_back({slice(y, 1, 0, data_dim_),
                         clamp(slice(y, 1, data_dim_, 2 * data_dim_), kLogSigmaMin, kLogSigmaMax)});
  }
  if (mixing_) out.mixing_logits = mixing_->forward(tape, features);
  return out;
}

void MultiHeadDecoder::collect(ParamList& out, const std::string& prefix) {
  trunk_.collect(out, prefix + ".trunk");
  for (std::size_t h = 0; h < heads_.size(); ++h) heads_[h].collect(out, prefix + ".head" + std::to_string(h));
  if (mixing_) mixing_->collect(out, prefix + ".mixing");
}

void MultiHeadDecoder::append_heads(std::size_t count, double mu_offset, std::mt19937_64& rng) {
  if (mixing_) throw ConfigError("append_heads is not supported with a mixing head");
  const std::size_t width = trunk_.widths().back();
  for (std::size_t i = 0; i < count; ++i) {
    Linear head = Linear::glorot(width, 2 * data_dim_, rng);
    for (std::size_t d = 0; d < data_dim_; ++d) head.bias[d] += mu_offset;
    heads_.push_back(std::move(head));
  }
}

Discriminator::Discriminator(const ModelConfig& config, std::mt19937_64& rng)
    : hypothesis_discrimination_(config.hypothesis_discrimination) {
  std::vector<std::size_t> widths{config.data_dim};
  widths.insert(widths.end(), config.disc_hidden.begin(), config.disc_hidden.end());
  widths.push_back(config.disc_features);
  features_ = Mlp(std::move(widths), true, config.leaky_slope, rng);
  out_ = Linear::glorot(config.disc_features + (hypothesis_discrimination_ ? 2 : 0), 1, rng);
}

Var Discriminator::forward(Tape& tape, const Var& x, std::size_t group_size, bool allow_ragged) const {
  Var f = features_.forward(tape, x);
  if (hypothesis_discrimination_) {
    // Per-pixel RMS scale, so the statistics stay O(1) whatever the dimension.
    const double d = static_cast<double>(x.shape()[1]);
    const Var stats = scale(group_distance_stats(x, group_size, allow_ragged), 1.0 / std::sqrt(d));
    const Var parts[] = {f, stats};
    f = concat(parts, 1);
  }
  const Var logit = out_.forward(tape, f);
  return reshape(logit, Shape{x.shape()[0]});
}

void Discriminator::collect(ParamList& out, const std::string& prefix) {
  features_.collect(out, prefix + ".features");
  out_.collect(out, prefix + ".out");
}

ParamList Discriminator::parameters() {
  ParamList out;
  collect(out, "discriminator");
  return out;
}

Generator::Generator(const ModelConfig& config, std::mt19937_64& rng) : config_(config) {
  config_.validate();
  encoder_ = Encoder(config_, rng);
  decoder_ = MultiHeadDecoder(config_, rng);
}

ParamList Generator::parameters() {
  ParamList out;
  encoder_.collect(out, "encoder");
  decoder_.collect(out, "decoder");
  return out;
}

void Generator::append_heads(std::size_t count, double mu_offset, std::mt19937_64& rng) {
  decoder_.append_heads(count, mu_offset, rng);
  config_.hypotheses += count;
}

std::vector<std::size_t> pixel_winners(const Tensor& x, const HypothesisSet& h) {
  if (h.size() == 0) throw ShapeError("pixel_winners: empty hypothesis set");
  const auto n = x.size();
  for (const auto& head : h.heads) {
    if (head.mu.value().size() != n) {
      throw ShapeError("pixel_winners: x " + shape_string(x.shape()) + " vs hypothesis " +
                       shape_string(head.mu.shape()));
    }
  }
  std::vector<std::size_t> winner(n, 0);
  std::vector<double> best(n);
  auto xd = x.data();
  {
    auto mu = h.heads[0].mu.value().data();
    auto ls = h.heads[0].log_sigma.value().data();
    for (std::size_t i = 0; i < n; ++i) best[i] = pixel_nll(xd[i], mu[i], ls[i]);
  }
  for (std::size_t k = 1; k < h.size(); ++k) {
    auto mu = h.heads[k].mu.value().data();
    auto ls = h.heads[k].log_sigma.value().data();
    for (std::size_t i = 0; i < n; ++i) {
      const double v = pixel_nll(xd[i], mu[i], ls[i]);
      if (v < best[i]) {
        best[i] = v;
        winner[i] = k;
      }
    }
  }
  return winner;
}

Var best_guess_assembly(const Var& x, const HypothesisSet& h) {
  const auto winners = pixel_winners(x.value(), h);
  if (h.size() == 1) return h.heads[0].mu;
  Tape& tape = x.tape();
  Var out;
  for (std::size_t k = 0; k < h.size(); ++k) {
    Tensor mask(h.heads[k].mu.shape(), 0.0);
    bool any = false;
    for (std::size_t i = 0; i < winners.size(); ++i) {
      if (winners[i] == k) {
        mask[i] = 1.0;
        any = true;
      }
    }
    if (!any) continue;
    const Var term = h.heads[k].mu * tape.constant(std::move(mask));
    out = out.valid() ? out + term : term;
  }
  return out;
}

Var stack_hypothesis_means(const HypothesisSet& h) {
  std::vector<Var> mus;
  mus.reserve(h.size());
  for (const auto& head : h.heads) mus.push_back(head.mu);
  const Var wide = concat(mus, 1);
  return reshape(wide, Shape{h.batch() * h.size(), h.dim()});
}

std::vector<Tensor> snapshot(const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(*p.tensor);
  return out;
}

void restore(const ParamList& params, const std::vector<Tensor>& values) {
  if (values.size() != params.size()) throw ContractError("restore: snapshot size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) *params[i].tensor = values[i];
}

}  // namespace conad
