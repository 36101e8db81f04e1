#pragma once

#include <string>
#include <string_view>

#include "conad/autodiff.hpp"
#include "conad/distributions.hpp"
#include "conad/models.hpp"

namespace conad {

enum class LossKind { wta, soft_wta, mdn, conad, mdn_gan, vae };
enum class Granularity { pixel, sample };

LossKind parse_loss_kind(std::string_view s);
std::string_view to_string(LossKind k);
Granularity parse_granularity(std::string_view s);
std::string_view to_string(Granularity g);

struct LossConfig {
  LossKind kind = LossKind::wta;
  double epsilon = 0.0;  // soft_wta only
  Granularity granularity = Granularity::pixel;
  double adv_weight = 1.0;
  double kl_weight = 1.0;
  bool symmetrized_kl = false;

  bool adversarial() const { return kind == LossKind::conad || kind == LossKind::mdn_gan; }
  bool uses_mixture() const { return kind == LossKind::mdn || kind == LossKind::mdn_gan; }
  void validate(std::size_t hypotheses) const;
};

// Per-pixel NLL of every hypothesis stacked to (batch, H, D).
ad::Var hypothesis_nll(const ad::Var& x, const HypothesisSet& h);

// Winner-takes-all NLL, averaged over the batch. Sample granularity picks one
// head per sample (min over heads of the summed NLL); pixel granularity picks
// one head per pixel.
ad::Var wta_loss(const ad::Var& x, const HypothesisSet& h, Granularity granularity);

// Sample-level winner weighted 1 - eps, every other head eps / (H - 1).
// Requires 0 <= eps <= (H - 1) / H.
ad::Var soft_wta_loss(const ad::Var& x, const HypothesisSet& h, double epsilon);

// Batch mean of the full-sample mixture NLL using the mixing logits.
ad::Var mdn_loss(const ad::Var& x, const HypothesisSet& h);

// The likelihood term selected by the loss kind.
ad::Var reconstruction_loss(const ad::Var& x, const HypothesisSet& h, const LossConfig& cfg);

// Logits assigned by the discriminator to the three fake sources.
struct FakeLogits {
  ad::Var prior;           // hypotheses decoded from z ~ N(0, I)
  ad::Var reconstruction;  // hypotheses decoded from z ~ q(z|x)
  ad::Var best_guess;      // pixel-wise mosaic of winning hypotheses
};

inline constexpr double kLogitClip = 30.0;

// BCE with real label on real_logits and fake label on every fake source;
// L_real plus the equally weighted mean of the three fake terms.
ad::Var discriminator_loss(const ad::Var& real_logits, const FakeLogits& fakes);

// Non-saturating generator term: mean over the three sources of -log D(fake).
ad::Var generator_adversarial_loss(const FakeLogits& fakes);

// Everything the generator produced for one batch.
struct GeneratorPass {
  LatentPosterior posterior;
  HypothesisSet reconstruction;
  std::optional<HypothesisSet> prior;  // only needed for adversarial terms
};

// Runs the discriminator on the three fake sources of a pass.
FakeLogits discriminate_fakes(ad::Tape& tape, const ad::Var& x, const GeneratorPass& pass,
                              const Discriminator& disc);

// L_G = reconstruction + kl_weight * KL + adv_weight * adversarial term. The
// adversarial term is skipped when `disc` is null or adv_weight is 0.
ad::Var generator_loss(ad::Tape& tape, const ad::Var& x, const GeneratorPass& pass,
                       const Discriminator* disc, const LossConfig& cfg);

}  // namespace conad
