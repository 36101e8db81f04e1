#include "conad/losses.hpp"

#include "conad/errors.hpp"

namespace conad {

using namespace ad;

LossKind parse_loss_kind(std::string_view s) {
  if (s == "wta") return LossKind::wta;
  if (s == "soft_wta") return LossKind::soft_wta;
  if (s == "mdn") return LossKind::mdn;
  if (s == "conad") return LossKind::conad;
  if (s == "mdn_gan") return LossKind::mdn_gan;
  if (s == "vae") return LossKind::vae;
  throw ConfigError("unknown loss kind '" + std::string(s) +
                    "' (valid: wta, soft_wta, mdn, conad, mdn_gan, vae)");
}

std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::wta: return "wta";
    case LossKind::soft_wta: return "soft_wta";
    case LossKind::mdn: return "mdn";
    case LossKind::conad: return "conad";
    case LossKind::mdn_gan: return "mdn_gan";
    case LossKind::vae: return "vae";
  }
  return "?";
}

Granularity parse_granularity(std::string_view s) {
  if (s == "pixel") return Granularity::pixel;
  if (s == "sample") return Granularity::sample;
  throw ConfigError("unknown granularity '" + std::string(s) + "' (valid: pixel, sample)");
}

std::string_view to_string(Granularity g) { return g == Granularity::pixel ? "pixel" : "sample"; }

void LossConfig::validate(std::size_t hypotheses) const {
  if (hypotheses == 0) throw ConfigError("loss: need at least one hypothesis");
  const double max_eps = static_cast<double>(hypotheses - 1) / static_cast<double>(hypotheses);
  if (!(epsilon >= 0.0 && epsilon <= max_eps)) {
    throw ConfigError("loss.epsilon must lie in [0, (H-1)/H] = [0, " + std::to_string(max_eps) + "], got " +
                      std::to_string(epsilon));
  }
  if (!(adv_weight >= 0.0)) throw ConfigError("loss.adv_weight must be >= 0");
  if (!(kl_weight >= 0.0)) throw ConfigError("loss.kl_weight must be >= 0");
  if (kind == LossKind::vae && hypotheses != 1) {
    throw ConfigError("loss.kind=vae requires model.hypotheses=1");
  }
}

Var hypothesis_nll(const Var& x, const HypothesisSet& h) {
  if (h.size() == 0) throw ConfigError("hypothesis set is empty");
  std::vector<Var> per_head;
  per_head.reserve(h.size());
  for (const auto& head : h.heads) {
    if (head.mu.shape() != x.shape()) {
      throw ShapeError("hypothesis shape " + shape_string(head.mu.shape()) + " does not match x " +
                       shape_string(x.shape()));
    }
    per_head.push_back(gaussian_nll(x, head));
  }
  const std::size_t batch = x.shape()[0];
  const std::size_t dim = x.shape()[1];
  return reshape(concat(per_head, 1), Shape{batch, h.size(), dim});
}

Var wta_loss(const Var& x, const HypothesisSet& h, Granularity granularity) {
  const Var nll = hypothesis_nll(x, h);
  if (granularity == Granularity::pixel) {
    return mean(sum(min_over_axis(nll, 1), 1));
  }
  return mean(min_over_axis(sum(nll, 2), 1));
}

Var soft_wta_loss(const Var& x, const HypothesisSet& h, double epsilon) {
  const std::size_t heads = h.size();
  const double max_eps = heads > 0 ? static_cast<double>(heads - 1) / static_cast<double>(heads) : 0.0;
  if (!(epsilon >= 0.0 && epsilon <= max_eps)) {
    throw ConfigError("soft_wta_loss: epsilon " + std::to_string(epsilon) + " outside [0, " +
                      std::to_string(max_eps) + "]");
  }
  const Var per_sample = sum(hypothesis_nll(x, h), 2);  // (batch, H)
  const Tensor& s = per_sample.value();
  const std::size_t batch = s.shape()[0];
  Tensor weights(s.shape());
  const double other = heads > 1 ? epsilon / static_cast<double>(heads - 1) : 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < heads; ++k) {
      if (s.at(b, k) < s.at(b, best)) best = k;
    }
    for (std::size_t k = 0; k < heads; ++k) weights.at(b, k) = k == best ? 1.0 - epsilon : other;
  }
  const Var w = x.tape().constant(std::move(weights));
  return scale(sum(per_sample * w), 1.0 / static_cast<double>(batch));
}

Var mdn_loss(const Var& x, const HypothesisSet& h) {
  if (!h.mixing_logits) throw ConfigError("mdn_loss: decoder has no mixing head");
  return mean(gmm_nll(x, MixtureParams{h.heads, *h.mixing_logits}));
}

Var reconstruction_loss(const Var& x, const HypothesisSet& h, const LossConfig& cfg) {
  switch (cfg.kind) {
    case LossKind::soft_wta: return soft_wta_loss(x, h, cfg.epsilon);
    case LossKind::mdn:
    case LossKind::mdn_gan: return mdn_loss(x, h);
    case LossKind::wta:
    case LossKind::conad:
    case LossKind::vae: return wta_loss(x, h, cfg.granularity);
  }
  throw ConfigError("unhandled loss kind");
}

namespace {

Var bce_real(const Var& logits) { return mean(softplus(-clamp(logits, -kLogitClip, kLogitClip))); }
Var bce_fake(const Var& logits) { return mean(softplus(clamp(logits, -kLogitClip, kLogitClip))); }

}  // namespace

Var discriminator_loss(const Var& real_logits, const FakeLogits& fakes) {
  if (!real_logits.valid() || !fakes.prior.valid() || !fakes.reconstruction.valid() ||
      !fakes.best_guess.valid()) {
    throw ContractError("discriminator_loss: real batch and all three fake sources are required");
  }
  const Var fake = bce_fake(fakes.prior) + bce_fake(fakes.reconstruction) + bce_fake(fakes.best_guess);
  return bce_real(real_logits) + scale(fake, 1.0 / 3.0);
}

Var generator_adversarial_loss(const FakeLogits& fakes) {
  if (!fakes.prior.valid() || !fakes.reconstruction.valid() || !fakes.best_guess.valid()) {
    throw ContractError("generator_adversarial_loss: all three fake sources are required");
  }
  const Var s = bce_real(fakes.prior) + bce_real(fakes.reconstruction) + bce_real(fakes.best_guess);
  return scale(s, 1.0 / 3.0);
}

FakeLogits discriminate_fakes(Tape& tape, const Var& x, const GeneratorPass& pass, const Discriminator& disc) {
  if (!pass.prior) throw ContractError("discriminate_fakes: pass has no prior decode");
  const std::size_t heads = pass.reconstruction.size();
  FakeLogits out;
  out.prior = disc.forward(tape, stack_hypothesis_means(*pass.prior), heads);
  out.reconstruction = disc.forward(tape, stack_hypothesis_means(pass.reconstruction), heads);
  out.best_guess = disc.forward(tape, best_guess_assembly(x, pass.reconstruction), heads, true);
  return out;
}

Var generator_loss(Tape& tape, const Var& x, const GeneratorPass& pass, const Discriminator* disc,
                   const LossConfig& cfg) {
  Var total = reconstruction_loss(x, pass.reconstruction, cfg);
  const Var kl = mean(kl_to_standard_normal(pass.posterior, cfg.symmetrized_kl));
  total = total + scale(kl, cfg.kl_weight);
  if (disc != nullptr && cfg.adv_weight > 0.0) {
    total = total + scale(generator_adversarial_loss(discriminate_fakes(tape, x, pass, *disc)), cfg.adv_weight);
  }
  return total;
}

}  // namespace conad
