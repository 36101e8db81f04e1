#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "conad/losses.hpp"
#include "conad/models.hpp"

namespace conad {

struct TrainConfig {
  std::size_t epochs_max = 200;
  std::size_t batch_size = 32;
  double lr = 0.001;
  // Upper bound on generator epochs between two discriminator epochs.
  std::size_t gen_epochs_per_disc = 5;
  std::size_t patience = 20;
  std::uint64_t seed = 0;
  LossConfig loss;
  // Off by default so that report files stay byte-identical across runs.
  bool record_wall_time = false;

  void validate(std::size_t hypotheses) const;
};

struct EpochRecord {
  std::size_t epoch = 0;      // 1-based generator epoch
  double train_loss = 0.0;    // mean WTA term over the epoch's batches
  double val_loss = 0.0;      // WTA on the validation split, posterior-mean latent
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;  // one per generator epoch actually run
  double initial_val_loss = 0.0;
  double best_val_loss = 0.0;
  std::size_t best_epoch = 0;  // 0: the initial parameters were kept
  std::size_t stopping_epoch = 0;
  double wall_seconds = 0.0;
  std::string checkpoint_path;

  std::size_t generator_updates = 0;
  std::size_t discriminator_updates = 0;
  // 'D' for a discriminator epoch, 'G' for a generator epoch, in run order.
  std::string schedule;
  // Accuracy on validation reals vs prior-decoded fakes after each D epoch.
  std::vector<double> disc_accuracy;
};

// Deterministic initialization of both players from a seed.
Generator make_generator(const ModelConfig& config, std::uint64_t seed);
Discriminator make_discriminator(const ModelConfig& config, std::uint64_t seed);

// WTA loss with z at the posterior mean, evaluated without gradients.
double validation_wta(Generator& gen, const Tensor& x, Granularity granularity);

// Adam on the configured likelihood + KL, early stopping on validation WTA.
// On return the generator holds the best-validation parameters.
TrainReport train_plain(Generator& gen, const Tensor& train, const Tensor& valid, const TrainConfig& config);

// Alternates one discriminator epoch with up to gen_epochs_per_disc generator
// epochs. A round ends early when a generator epoch does not improve the
// validation WTA reached so far in that round. The discriminator is frozen
// during generator steps and vice versa. Requires an adversarial loss kind.
TrainReport train_adversarial(Generator& gen, Discriminator& disc, const Tensor& train, const Tensor& valid,
                              const TrainConfig& config);

// Dispatches on config.loss.adversarial().
TrainReport train(Generator& gen, Discriminator& disc, const Tensor& train, const Tensor& valid,
                  const TrainConfig& config);

// CSV with header epoch,train_loss,val_loss,seconds.
std::string report_csv(const TrainReport& report);
void write_report_csv(const std::string& path, const TrainReport& report);

}  // namespace conad
