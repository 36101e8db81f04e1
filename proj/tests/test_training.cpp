#include "conad/training.hpp"

#include "conad/data.hpp"
#include "conad/errors.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace conad;
using namespace conad::ad;

namespace {

ModelConfig tiny_model(std::size_t dim, std::size_t heads) {
  ModelConfig c;
  c.data_dim = dim;
  c.latent_dim = 2;
  c.hypotheses = heads;
  c.encoder_hidden = {16};
  c.trunk_hidden = {16};
  c.disc_hidden = {16};
  c.disc_features = 8;
  return c;
}

// Two 1-D modes at -1 and +1.
Tensor two_modes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::bernoulli_distribution coin(0.5);
  Tensor t(Shape{n, 1});
  for (std::size_t i = 0; i < n; ++i) t[i] = (coin(rng) ? 1.0 : -1.0) + noise(rng);
  return t;
}

std::vector<Tensor> param_values(Generator& g) { return snapshot(g.parameters()); }

}  // namespace

TEST_CASE("zero epochs returns the initial model unchanged") {
  Generator g = make_generator(tiny_model(1, 2), 3);
  const auto before = param_values(g);
  TrainConfig cfg;
  cfg.epochs_max = 0;
  const Tensor x = two_modes(64, 1);
  const TrainReport r = train_plain(g, x, x, cfg);
  CHECK(r.epochs.empty());
  CHECK(r.stopping_epoch == 0);
  CHECK(r.best_epoch == 0);
  CHECK(param_values(g) == before);
}

TEST_CASE("training reduces the wta loss on two 1-D modes") {
  Generator g = make_generator(tiny_model(1, 2), 5);
  const Tensor train = two_modes(200, 1), valid = two_modes(50, 2);
  TrainConfig cfg;
  cfg.epochs_max = 200;
  cfg.patience = 200;
  cfg.seed = 5;
  const double initial = validation_wta(g, valid, Granularity::pixel);
  const TrainReport r = train_plain(g, train, valid, cfg);
  CHECK(r.initial_val_loss == initial);
  CHECK(validation_wta(g, valid, Granularity::pixel) < initial);
  CHECK(r.best_val_loss < initial - 0.5);
  CHECK(r.epochs.size() == r.stopping_epoch);
}

TEST_CASE("same seed gives bit identical curves and parameters") {
  const Tensor train = two_modes(100, 3), valid = two_modes(30, 4);
  TrainConfig cfg;
  cfg.epochs_max = 15;
  cfg.patience = 15;
  cfg.seed = 9;
  Generator a = make_generator(tiny_model(1, 3), 9), b = make_generator(tiny_model(1, 3), 9);
  const TrainReport ra = train_plain(a, train, valid, cfg);
  const TrainReport rb = train_plain(b, train, valid, cfg);
  CHECK(report_csv(ra) == report_csv(rb));
  CHECK(param_values(a) == param_values(b));

  cfg.loss.kind = LossKind::conad;
  Generator c = make_generator(tiny_model(1, 3), 9), d = make_generator(tiny_model(1, 3), 9);
  Discriminator dc = make_discriminator(tiny_model(1, 3), 9), dd = make_discriminator(tiny_model(1, 3), 9);
  const TrainReport rc = train_adversarial(c, dc, train, valid, cfg);
  const TrainReport rd = train_adversarial(d, dd, train, valid, cfg);
  CHECK(report_csv(rc) == report_csv(rd));
  CHECK(rc.schedule == rd.schedule);
  CHECK(param_values(c) == param_values(d));
  CHECK(snapshot(dc.parameters()) == snapshot(dd.parameters()));
}

TEST_CASE("early stopping keeps the exact minimum validation loss") {
  const Tensor train = two_modes(100, 5), valid = two_modes(40, 6);
  TrainConfig cfg;
  cfg.epochs_max = 40;
  cfg.patience = 3;
  cfg.lr = 0.01;
  Generator g = make_generator(tiny_model(1, 2), 1);
  const TrainReport r = train_plain(g, train, valid, cfg);
  double best = r.initial_val_loss;
  for (const auto& e : r.epochs) best = std::min(best, e.val_loss);
  CHECK(r.best_val_loss == best);
  CHECK(validation_wta(g, valid, Granularity::pixel) == best);
  CHECK(r.epochs.size() <= cfg.epochs_max);
  if (r.epochs.size() < cfg.epochs_max) CHECK(r.epochs.size() - r.best_epoch == cfg.patience);
  for (std::size_t i = 0; i < r.epochs.size(); ++i) CHECK(r.epochs[i].epoch == i + 1);
}

TEST_CASE("vae and wta with one hypothesis train identically") {
  const Tensor train = two_modes(80, 7), valid = two_modes(20, 8);
  TrainConfig cfg;
  cfg.epochs_max = 10;
  cfg.patience = 10;
  Generator a = make_generator(tiny_model(1, 1), 2), b = make_generator(tiny_model(1, 1), 2);
  cfg.loss.kind = LossKind::vae;
  const TrainReport ra = train_plain(a, train, valid, cfg);
  cfg.loss.kind = LossKind::wta;
  const TrainReport rb = train_plain(b, train, valid, cfg);
  CHECK(report_csv(ra) == report_csv(rb));
}

TEST_CASE("adversarial training with zero weight follows the plain trajectory") {
  const Tensor train = two_modes(100, 9), valid = two_modes(30, 10);
  TrainConfig cfg;
  cfg.epochs_max = 12;
  cfg.patience = 12;
  cfg.seed = 4;
  Generator plain = make_generator(tiny_model(1, 3), 4);
  const TrainReport rp = train_plain(plain, train, valid, cfg);

  cfg.loss.kind = LossKind::conad;
  cfg.loss.adv_weight = 0.0;
  Generator adv = make_generator(tiny_model(1, 3), 4);
  Discriminator disc = make_discriminator(tiny_model(1, 3), 4);
  const TrainReport ra = train_adversarial(adv, disc, train, valid, cfg);
  CHECK(report_csv(ra) == report_csv(rp));
  CHECK(param_values(adv) == param_values(plain));
  CHECK(ra.discriminator_updates > 0);
}

TEST_CASE("one generator epoch per discriminator epoch alternates strictly") {
  const Tensor train = two_modes(64, 11), valid = two_modes(16, 12);
  TrainConfig cfg;
  cfg.epochs_max = 6;
  cfg.patience = 6;
  cfg.batch_size = 16;
  cfg.gen_epochs_per_disc = 1;
  cfg.loss.kind = LossKind::conad;
  Generator g = make_generator(tiny_model(1, 2), 6);
  Discriminator d = make_discriminator(tiny_model(1, 2), 6);
  const TrainReport r = train_adversarial(g, d, train, valid, cfg);
  CHECK(r.schedule == "DGDGDGDGDGDG");
  CHECK(r.generator_updates == 6 * 4);
  CHECK(r.discriminator_updates == 6 * 4);
  CHECK(r.disc_accuracy.size() == 6);
}

TEST_CASE("inner rounds never exceed the generator epoch budget") {
  const Tensor train = two_modes(64, 13), valid = two_modes(16, 14);
  TrainConfig cfg;
  cfg.epochs_max = 20;
  cfg.patience = 20;
  cfg.gen_epochs_per_disc = 3;
  cfg.loss.kind = LossKind::conad;
  Generator g = make_generator(tiny_model(1, 2), 7);
  Discriminator d = make_discriminator(tiny_model(1, 2), 7);
  const TrainReport r = train_adversarial(g, d, train, valid, cfg);
  REQUIRE(r.schedule.front() == 'D');
  std::size_t run = 0, gens = 0;
  for (char c : r.schedule) {
    if (c == 'G') {
      ++run;
      ++gens;
      CHECK(run <= 3);
    } else {
      run = 0;
    }
  }
  CHECK(gens == r.epochs.size());
}

TEST_CASE("discriminator separates reals from prior fakes on texture after one epoch") {
  const Dataset ds = gen_texture_anomaly(1000, 16, 0);
  ModelConfig mc = tiny_model(ds.dim, 2);
  mc.encoder_hidden = {64, 32};
  mc.trunk_hidden = {32, 64};
  mc.disc_hidden = {64, 32};
  mc.disc_features = 16;
  TrainConfig cfg;
  cfg.epochs_max = 1;
  cfg.patience = 1;
  cfg.loss.kind = LossKind::conad;
  Generator g = make_generator(mc, 0);
  Discriminator d = make_discriminator(mc, 0);
  const TrainReport r = train_adversarial(g, d, ds.train, ds.valid, cfg);
  REQUIRE(r.disc_accuracy.size() == 1);
  CHECK(r.disc_accuracy[0] > 0.5);
}

TEST_CASE("each player's loss only reaches its own parameters") {
  ModelConfig mc = tiny_model(3, 2);
  Generator g = make_generator(mc, 1);
  Discriminator d = make_discriminator(mc, 1);
  const auto gp = g.parameters();
  const auto dp = d.parameters();
  std::mt19937_64 rng(2);
  const Tensor xb = oracle::random_tensor(Shape{4, 3}, rng);
  LossConfig lc;
  lc.kind = LossKind::conad;

  auto pass_on = [&](Tape& tape, const Var& x) {
    GeneratorPass pass;
    pass.posterior = g.encode(tape, x);
    pass.reconstruction = g.decode(tape, reparam_sample(pass.posterior, rng));
    pass.prior = g.decode(tape, tape.constant(standard_normal(Shape{4, 2}, rng)));
    return pass;
  };

  {
    // Discriminator step: generator frozen.
    std::vector<const Tensor*> frozen;
    for (const auto& p : gp) frozen.push_back(p.tensor);
    Tape tape;
    tape.freeze(frozen);
    const Var x = tape.constant(xb);
    const GeneratorPass pass = pass_on(tape, x);
    const Var loss = discriminator_loss(d.forward(tape, x, 2, true), discriminate_fakes(tape, x, pass, d));
    const Gradients grads = backward(loss);
    for (const auto& p : gp) CHECK(grads.of_param(*p.tensor) == Tensor(p.tensor->shape(), 0.0));
    double norm = 0.0;
    for (const auto& p : dp) for (double v : grads.of_param(*p.tensor).data()) norm += v * v;
    CHECK(norm > 0.0);
  }
  {
    // Generator step: discriminator frozen.
    std::vector<const Tensor*> frozen;
    for (const auto& p : dp) frozen.push_back(p.tensor);
    Tape tape;
    tape.freeze(frozen);
    const Var x = tape.constant(xb);
    const GeneratorPass pass = pass_on(tape, x);
    const Gradients grads = backward(generator_loss(tape, x, pass, &d, lc));
    for (const auto& p : dp) CHECK(grads.of_param(*p.tensor) == Tensor(p.tensor->shape(), 0.0));
    double norm = 0.0;
    for (const auto& p : gp) for (double v : grads.of_param(*p.tensor).data()) norm += v * v;
    CHECK(norm > 0.0);
  }
}

TEST_CASE("training errors") {
  Generator g = make_generator(tiny_model(1, 2), 1);
  Discriminator d = make_discriminator(tiny_model(1, 2), 1);
  const Tensor x = two_modes(20, 1);
  TrainConfig cfg;
  cfg.epochs_max = 2;
  cfg.patience = 2;
  CHECK_THROWS_AS(train_plain(g, Tensor(), x, cfg), DataError);
  CHECK_THROWS_AS(train_plain(g, x, Tensor(), cfg), DataError);
  CHECK_THROWS_AS(train_plain(g, Tensor(Shape{4, 2}), x, cfg), ConfigError);
  CHECK_THROWS_AS(train_adversarial(g, d, x, x, cfg), ConfigError);

  Tensor poisoned = x;
  poisoned[3] = NAN;
  CHECK_THROWS_AS(train_plain(g, poisoned, x, cfg), NumericalError);
  try {
    train_plain(g, poisoned, x, cfg);
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }

  TrainConfig bad = cfg;
  bad.patience = 5;
  CHECK_THROWS_AS(bad.validate(2), ConfigError);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(2), ConfigError);
  bad = cfg;
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(2), ConfigError);
}

TEST_CASE("report csv format") {
  TrainReport r;
  r.epochs.push_back({1, 0.5, 0.25, 0.0});
  CHECK(report_csv(r) == "epoch,train_loss,val_loss,seconds\n1,0.5,0.25,0\n");
}
