#include "conad/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "conad/data.hpp"
#include "conad/errors.hpp"

namespace conad {

using namespace ad;

namespace {

constexpr std::uint64_t kStreamGeneratorInit = 10;
constexpr std::uint64_t kStreamGeneratorSteps = 11;
constexpr std::uint64_t kStreamDiscriminatorSteps = 12;
constexpr std::uint64_t kStreamPrior = 13;
constexpr std::uint64_t kStreamAccuracy = 14;
constexpr std::uint64_t kStreamDiscriminatorInit = 20;

using Clock = std::chrono::steady_clock;

std::vector<const Tensor*> tensor_pointers(const ParamList& params) {
  std::vector<const Tensor*> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

std::vector<Tensor> param_grads(const Gradients& g, const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(g.of_param(*p.tensor));
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < n; b += batch) {
    out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(b),
                     idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + batch)));
  }
  return out;
}

void check_inputs(const Generator& gen, const Tensor& train, const Tensor& valid) {
  if (train.rank() != 2 || train.rows() == 0) throw DataError("training split is empty");
  if (valid.rank() != 2 || valid.rows() == 0) throw DataError("validation split is empty");
  const auto d = gen.config().data_dim;
  if (train.cols() != d || valid.cols() != d) {
    throw ConfigError("data dimension " + std::to_string(train.cols()) + " does not match model.data_dim " +
                      std::to_string(d));
  }
}

void check_finite(double v, const char* what, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string(what) + " is not finite at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batch));
  }
}

Tensor prior_noise(std::size_t rows, std::size_t latent, std::mt19937_64& rng) {
  return standard_normal(Shape{rows, latent}, rng);
}

// Shared state of one training run.
class Trainer {
 public:
  Trainer(Generator& gen, Discriminator* disc, const Tensor& train, const Tensor& valid, const TrainConfig& cfg)
      : gen_(gen),
        disc_(disc),
        train_(train),
        valid_(valid),
        cfg_(cfg),
        gen_params_(gen.parameters()),
        gen_adam_(make_adam_state(gen_params_, AdamConfig{cfg.lr})),
        gen_rng_(make_rng(cfg.seed, kStreamGeneratorSteps)),
        disc_rng_(make_rng(cfg.seed, kStreamDiscriminatorSteps)),
        prior_rng_(make_rng(cfg.seed, kStreamPrior)),
        accuracy_rng_(make_rng(cfg.seed, kStreamAccuracy)),
        start_(Clock::now()) {
    if (disc_ != nullptr) {
      disc_params_ = disc_->parameters();
      disc_adam_ = make_adam_state(disc_params_, AdamConfig{cfg.lr});
    }
    report_.initial_val_loss = validation_wta(gen_, valid_, cfg_.loss.granularity);
    check_finite(report_.initial_val_loss, "initial validation loss", 0, 0);
    report_.best_val_loss = report_.initial_val_loss;
    best_ = snapshot(gen_params_);
  }

  bool adversarial_steps() const { return disc_ != nullptr && cfg_.loss.adv_weight > 0.0; }

  // Runs one generator epoch and records it. Returns the validation loss.
  double generator_epoch() {
    const auto epoch_start = Clock::now();
    const std::size_t epoch = report_.epochs.size() + 1;
    const auto batches = make_batches(train_.rows(), cfg_.batch_size, gen_rng_);
    double wta_sum = 0.0;
    std::size_t rows = 0;
    std::vector<const Tensor*> frozen;
    if (disc_ != nullptr) frozen = tensor_pointers(disc_params_);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Tensor xb = train_.gather_rows(batches[b]);
      Tape tape;
      tape.freeze(frozen);
      const Var x = tape.constant(xb);
      GeneratorPass pass;
      pass.posterior = gen_.encode(tape, x);
      const Tensor eps = standard_normal(pass.posterior.mu.shape(), gen_rng_);
      pass.reconstruction = gen_.decode(tape, reparam_sample(pass.posterior, eps));
      if (adversarial_steps()) {
        const Var zp = tape.constant(prior_noise(xb.rows(), gen_.config().latent_dim, prior_rng_));
        pass.prior = gen_.decode(tape, zp);
      }
      const Var loss = generator_loss(tape, x, pass, adversarial_steps() ? disc_ : nullptr, cfg_.loss);
      check_finite(loss.value().item(), "generator loss", epoch, b + 1);
      const double wta = wta_loss(x, pass.reconstruction, cfg_.loss.granularity).value().item();
      wta_sum += wta * static_cast<double>(xb.rows());
      rows += xb.rows();
      const Gradients g = backward(loss);
      adam_step(gen_params_, param_grads(g, gen_params_), gen_adam_);
      ++report_.generator_updates;
    }
    report_.schedule.push_back('G');

    const double val = validation_wta(gen_, valid_, cfg_.loss.granularity);
    check_finite(val, "validation loss", epoch, batches.size());
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = wta_sum / static_cast<double>(rows);
    rec.val_loss = val;
    if (cfg_.record_wall_time) {
      rec.seconds = std::chrono::duration<double>(Clock::now() - epoch_start).count();
    }
    report_.epochs.push_back(rec);
    if (val < report_.best_val_loss) {
      report_.best_val_loss = val;
      report_.best_epoch = epoch;
      best_ = snapshot(gen_params_);
    }
    return val;
  }

  void discriminator_epoch() {
    const std::size_t round = report_.disc_accuracy.size() + 1;
    const auto batches = make_batches(train_.rows(), cfg_.batch_size, disc_rng_);
    const auto frozen = tensor_pointers(gen_params_);
    const std::size_t heads = gen_.config().hypotheses;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Tensor xb = train_.gather_rows(batches[b]);
      Tape tape;
      tape.freeze(frozen);
      const Var x = tape.constant(xb);
      GeneratorPass pass;
      pass.posterior = gen_.encode(tape, x);
      const Tensor eps = standard_normal(pass.posterior.mu.shape(), disc_rng_);
      pass.reconstruction = gen_.decode(tape, reparam_sample(pass.posterior, eps));
      pass.prior = gen_.decode(tape, tape.constant(prior_noise(xb.rows(), gen_.config().latent_dim, disc_rng_)));
      const Var real = disc_->forward(tape, x, heads, true);
      const Var loss = discriminator_loss(real, discriminate_fakes(tape, x, pass, *disc_));
      check_finite(loss.value().item(), "discriminator loss", round, b + 1);
      const Gradients g = backward(loss);
      adam_step(disc_params_, param_grads(g, disc_params_), disc_adam_);
      ++report_.discriminator_updates;
    }
    report_.schedule.push_back('D');
    report_.disc_accuracy.push_back(discriminator_accuracy());
  }

  // Fraction of validation reals scored real plus prior-decoded hypothesis
  // means scored fake, over both sets.
  double discriminator_accuracy() {
    Tape tape;
    tape.set_grad_enabled(false);
    const std::size_t heads = gen_.config().hypotheses;
    const Var real = disc_->forward(tape, tape.constant(valid_), heads, true);
    const Var zp = tape.constant(prior_noise(valid_.rows(), gen_.config().latent_dim, accuracy_rng_));
    const Var fake = disc_->forward(tape, stack_hypothesis_means(gen_.decode(tape, zp)), heads);
    std::size_t correct = 0;
    for (double v : real.value().data()) correct += v > 0.0 ? 1 : 0;
    for (double v : fake.value().data()) correct += v <= 0.0 ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(real.value().size() + fake.value().size());
  }

  bool patience_exhausted() const { return report_.epochs.size() - report_.best_epoch >= cfg_.patience; }
  bool budget_exhausted() const { return report_.epochs.size() >= cfg_.epochs_max; }
  double last_val() const {
    return report_.epochs.empty() ? report_.initial_val_loss : report_.epochs.back().val_loss;
  }

  TrainReport finish() {
    restore(gen_params_, best_);
    report_.stopping_epoch = report_.epochs.size();
    if (cfg_.record_wall_time) {
      report_.wall_seconds = std::chrono::duration<double>(Clock::now() - start_).count();
    }
    return std::move(report_);
  }

 private:
  Generator& gen_;
  Discriminator* disc_;
  const Tensor& train_;
  const Tensor& valid_;
  const TrainConfig& cfg_;
  ParamList gen_params_;
  ParamList disc_params_;
  AdamState gen_adam_;
  AdamState disc_adam_;
  std::mt19937_64 gen_rng_;
  std::mt19937_64 disc_rng_;
  std::mt19937_64 prior_rng_;
  std::mt19937_64 accuracy_rng_;
  std::vector<Tensor> best_;
  TrainReport report_;
  Clock::time_point start_;
};

}  // namespace

void TrainConfig::validate(std::size_t hypotheses) const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be positive");
  if (gen_epochs_per_disc == 0) throw ConfigError("train.gen_epochs_per_disc must be positive");
  if (patience == 0) throw ConfigError("train.patience must be positive");
  if (epochs_max > 0 && patience > epochs_max) {
    throw ConfigError("train.patience (" + std::to_string(patience) + ") exceeds train.epochs_max (" +
                      std::to_string(epochs_max) + ")");
  }
  loss.validate(hypotheses);
}

Generator make_generator(const ModelConfig& config, std::uint64_t seed) {
  auto rng = make_rng(seed, kStreamGeneratorInit);
  return Generator(config, rng);
}

Discriminator make_discriminator(const ModelConfig& config, std::uint64_t seed) {
  auto rng = make_rng(seed, kStreamDiscriminatorInit);
  return Discriminator(config, rng);
}

double validation_wta(Generator& gen, const Tensor& x, Granularity granularity) {
  Tape tape;
  tape.set_grad_enabled(false);
  const Var xv = tape.constant(x);
  const LatentPosterior post = gen.encode(tape, xv);
  return wta_loss(xv, gen.decode(tape, post.mu), granularity).value().item();
}

TrainReport train_plain(Generator& gen, const Tensor& train, const Tensor& valid, const TrainConfig& config) {
  config.validate(gen.config().hypotheses);
  check_inputs(gen, train, valid);
  if (config.loss.uses_mixture() && !gen.config().mixing_head) {
    throw ConfigError("loss.kind=" + std::string(to_string(config.loss.kind)) + " needs a mixing head");
  }
  Trainer t(gen, nullptr, train, valid, config);
  while (!t.budget_exhausted() && !t.patience_exhausted()) t.generator_epoch();
  return t.finish();
}

TrainReport train_adversarial(Generator& gen, Discriminator& disc, const Tensor& train, const Tensor& valid,
                              const TrainConfig& config) {
  config.validate(gen.config().hypotheses);
  check_inputs(gen, train, valid);
  if (!config.loss.adversarial()) {
    throw ConfigError("train_adversarial needs loss.kind conad or mdn_gan, got " +
                      std::string(to_string(config.loss.kind)));
  }
  if (config.loss.uses_mixture() && !gen.config().mixing_head) {
    throw ConfigError("loss.kind=mdn_gan needs a mixing head");
  }
  Trainer t(gen, &disc, train, valid, config);
  while (!t.budget_exhausted() && !t.patience_exhausted()) {
    t.discriminator_epoch();
    double round_best = t.last_val();
    for (std::size_t i = 0; i < config.gen_epochs_per_disc; ++i) {
      if (t.budget_exhausted() || t.patience_exhausted()) break;
      const double val = t.generator_epoch();
      if (!(val < round_best)) break;
      round_best = val;
    }
  }
  return t.finish();
}

TrainReport train(Generator& gen, Discriminator& disc, const Tensor& train, const Tensor& valid,
                  const TrainConfig& config) {
  return config.loss.adversarial() ? train_adversarial(gen, disc, train, valid, config)
                                   : train_plain(gen, train, valid, config);
}

std::string report_csv(const TrainReport& report) {
  std::string out = "epoch,train_loss,val_loss,seconds\n";
  char buf[160];
  for (const auto& e : report.epochs) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss, e.seconds);
    out += buf;
  }
  return out;
}

void write_report_csv(const std::string& path, const TrainReport& report) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write '" + path + "'");
  os << report_csv(report);
  if (!os) throw DataError("failed writing '" + path + "'");
}

}  // namespace conad
