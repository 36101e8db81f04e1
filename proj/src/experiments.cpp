#include "conad/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numeric>

#include "conad/errors.hpp"
#include "conad/losses.hpp"
#include "conad/svg.hpp"

namespace conad {

using namespace ad;

namespace {

constexpr std::uint64_t kStreamSamples = 30;
constexpr std::uint64_t kStreamDemo = 31;

std::string path_in(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir + "': " + ec.message());
}

// Maps every value to its rank in [0, 1] so far-away outliers do not wash
// out the colour scale.
std::vector<double> rank_normalize(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> out(v.size());
  const double denom = v.size() > 1 ? static_cast<double>(v.size() - 1) : 1.0;
  for (std::size_t i = 0; i < order.size(); ++i) out[order[i]] = static_cast<double>(i) / denom;
  return out;
}

HypothesisSet constant_hypotheses(Tape& tape, std::size_t batch, std::size_t heads, std::size_t dim,
                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  HypothesisSet h;
  for (std::size_t k = 0; k < heads; ++k) {
    Tensor mu(Shape{batch, dim}), ls(Shape{batch, dim});
    for (double& v : mu.data()) v = 2.0 * u(rng);
    for (double& v : ls.data()) v = 0.5 * u(rng);
    h.heads.push_back({tape.constant(std::move(mu)), tape.constant(std::move(ls))});
  }
  return h;
}

}  // namespace

Tensor stack_test(const Dataset& ds, std::vector<Label>& labels) {
  const std::size_t nn = ds.test_normal.rows(), na = ds.test_anomaly.rows(), d = ds.test_normal.cols();
  Tensor out(Shape{nn + na, d});
  labels.assign(nn, Label::normal);
  labels.resize(nn + na, Label::anomaly);
  std::copy(ds.test_normal.data().begin(), ds.test_normal.data().end(), out.data().begin());
  std::copy(ds.test_anomaly.data().begin(), ds.test_anomaly.data().end(),
            out.data().begin() + static_cast<std::ptrdiff_t>(nn * d));
  return out;
}

Evaluation evaluate(Generator& gen, const Tensor& inputs, std::vector<Label> labels, ScoreMode mode,
                    double top_percent) {
  Evaluation e;
  e.inputs = inputs;
  e.labels = std::move(labels);
  e.pixel = pixel_scores(gen, inputs, mode);
  e.aggregate = aggregate_rows(e.pixel, top_percent);
  e.roc = auroc(e.aggregate, e.labels);
  return e;
}

Evaluation evaluate(Generator& gen, const Dataset& ds, ScoreMode mode, double top_percent) {
  std::vector<Label> labels;
  Tensor inputs = stack_test(ds, labels);
  return evaluate(gen, inputs, std::move(labels), mode, top_percent);
}

ModelConfig model_for(const ExperimentConfig& cfg, const Dataset& ds) {
  ModelConfig m = cfg.model;
  m.data_dim = ds.dim;
  m.mixing_head = cfg.train.loss.uses_mixture();
  return m;
}

Run run_experiment(const ExperimentConfig& cfg, const Dataset& ds) {
  const ModelConfig mc = model_for(cfg, ds);
  Run r{make_generator(mc, cfg.train.seed), make_discriminator(mc, cfg.train.seed), {}, {}};
  r.report = train(r.gen, r.disc, ds.train, ds.valid, cfg.train);
  r.eval = evaluate(r.gen, ds, cfg.score.mode_for(cfg.train.loss), cfg.score.top_percent_for(ds.is_image()));
  return r;
}

Tensor sample_hypothesis_means(Generator& gen, std::size_t draws, std::uint64_t seed) {
  auto rng = make_rng(seed, kStreamSamples);
  Tape tape;
  tape.set_grad_enabled(false);
  const Var z = tape.constant(standard_normal(Shape{draws, gen.config().latent_dim}, rng));
  return stack_hypothesis_means(gen.decode(tape, z)).value();
}

double off_manifold_fraction(const Tensor& samples, double threshold) {
  if (samples.rank() != 2 || samples.cols() != 2) throw ShapeError("off_manifold_fraction expects (n, 2) points");
  std::size_t off = 0;
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    off += half_moon_distance(samples.at(i, 0), samples.at(i, 1)) > threshold ? 1 : 0;
  }
  return static_cast<double>(off) / static_cast<double>(samples.rows());
}

// --- demonstrations -----------------------------------------------------------

double DemoReport::value(const std::string& key) const {
  for (const auto& [k, v] : values) {
    if (k == key) return v;
  }
  throw ContractError("demo report has no value '" + key + "'");
}

std::string DemoReport::text() const {
  std::string out = "demo " + name + "\n";
  char buf[96];
  for (const auto& [k, v] : values) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += k + " " + buf + "\n";
  }
  for (const auto& f : files) out += "file " + f + "\n";
  out += std::string("result ") + (passed ? "PASS" : "FAIL") + "\n";
  return out;
}

DemoReport demo_lemma41(const ExperimentConfig& cfg, const std::string& out_dir) {
  ExperimentConfig c = cfg;
  c.train.loss.kind = LossKind::wta;
  c.train.loss.epsilon = 0.0;
  const Dataset ds = make_dataset(c.data);
  Generator gen = make_generator(model_for(c, ds), c.train.seed);
  const TrainReport rep = train_plain(gen, ds.train, ds.valid, c.train);

  auto energy = [&](Granularity g) {
    Tape tape;
    tape.set_grad_enabled(false);
    const Var x = tape.constant(ds.train);
    return wta_loss(x, gen.decode(tape, gen.encode(tape, x).mu), g).value().item();
  };
  const double before_sample = energy(Granularity::sample);
  const double before_pixel = energy(Granularity::pixel);
  const std::size_t original = gen.config().hypotheses;
  auto rng = make_rng(c.train.seed, kStreamDemo);
  gen.append_heads(original, 1e3, rng);

  std::size_t new_wins = 0;
  {
    Tape tape;
    tape.set_grad_enabled(false);
    const Var x = tape.constant(ds.train);
    for (std::size_t w : pixel_winners(ds.train, gen.decode(tape, gen.encode(tape, x).mu))) {
      new_wins += w >= original ? 1 : 0;
    }
  }
  const double after_sample = energy(Granularity::sample);
  const double after_pixel = energy(Granularity::pixel);

  DemoReport r;
  r.name = "lemma41";
  r.values = {{"epochs", static_cast<double>(rep.stopping_epoch)},
              {"hypotheses_before", static_cast<double>(original)},
              {"hypotheses_after", static_cast<double>(gen.config().hypotheses)},
              {"energy_sample_before", before_sample},
              {"energy_sample_after", after_sample},
              {"delta_sample", std::abs(after_sample - before_sample)},
              {"energy_pixel_before", before_pixel},
              {"energy_pixel_after", after_pixel},
              {"delta_pixel", std::abs(after_pixel - before_pixel)},
              {"appended_head_wins", static_cast<double>(new_wins)}};
  r.passed = r.value("delta_sample") < 1e-12 && r.value("delta_pixel") < 1e-12 && new_wins == 0;
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    svg::write_file(path_in(out_dir, "report.txt"), r.text());
  }
  return r;
}

DemoReport demo_lemma42(const ExperimentConfig& cfg, const std::string& out_dir) {
  const std::size_t heads = std::max<std::size_t>(cfg.model.hypotheses, 2);
  const std::size_t batch = 16, dim = 6, instances = 50, sweep = 21;
  const double eps_max = static_cast<double>(heads - 1) / static_cast<double>(heads);
  auto rng = make_rng(cfg.train.seed, kStreamDemo);

  double dev_zero = 0.0, dev_uniform = 0.0;
  std::vector<double> sweep_eps(sweep), sweep_loss(sweep, 0.0);
  for (std::size_t i = 0; i < sweep; ++i) sweep_eps[i] = eps_max * static_cast<double>(i) / (sweep - 1);
  double wta_mean = 0.0, uniform_mean = 0.0;

  for (std::size_t t = 0; t < instances; ++t) {
    Tape tape;
    tape.set_grad_enabled(false);
    const HypothesisSet h = constant_hypotheses(tape, batch, heads, dim, rng);
    Tensor xt(Shape{batch, dim});
    std::normal_distribution<double> n01(0.0, 1.5);
    for (double& v : xt.data()) v = n01(rng);
    const Var x = tape.constant(xt);

    // Uniform hypothesis mean, on plain doubles.
    double uniform = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t k = 0; k < heads; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          const std::size_t e = b * dim + j;
          s += pixel_nll(xt[e], h.heads[k].mu.value()[e], h.heads[k].log_sigma.value()[e]);
        }
        uniform += s / static_cast<double>(heads);
      }
    }
    uniform /= static_cast<double>(batch);

    const double wta = wta_loss(x, h, Granularity::sample).value().item();
    dev_zero = std::max(dev_zero, std::abs(soft_wta_loss(x, h, 0.0).value().item() - wta));
    dev_uniform = std::max(dev_uniform, std::abs(soft_wta_loss(x, h, eps_max).value().item() - uniform));
    for (std::size_t i = 0; i < sweep; ++i) {
      sweep_loss[i] += soft_wta_loss(x, h, sweep_eps[i]).value().item() / static_cast<double>(instances);
    }
    wta_mean += wta / static_cast<double>(instances);
    uniform_mean += uniform / static_cast<double>(instances);
  }

  DemoReport r;
  r.name = "lemma42";
  r.values = {{"hypotheses", static_cast<double>(heads)},
              {"instances", static_cast<double>(instances)},
              {"epsilon_max", eps_max},
              {"max_abs_dev_eps0_vs_wta", dev_zero},
              {"max_abs_dev_epsmax_vs_uniform", dev_uniform},
              {"mean_wta", wta_mean},
              {"mean_uniform", uniform_mean}};
  r.passed = dev_zero < 1e-12 && dev_uniform < 1e-12;
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    const std::vector<svg::LineSeries> lines{
        {"soft-WTA", "#1f77b4", sweep_eps, sweep_loss},
        {"WTA", "#d62728", {0.0, eps_max}, {wta_mean, wta_mean}},
        {"uniform mean", "#2ca02c", {0.0, eps_max}, {uniform_mean, uniform_mean}}};
    svg::write_file(path_in(out_dir, "epsilon_sweep.svg"),
                    svg::line_chart(lines, "soft-WTA loss against epsilon", "epsilon", "loss"));
    r.files.push_back("epsilon_sweep.svg");
    svg::write_file(path_in(out_dir, "report.txt"), r.text());
  }
  return r;
}

DemoReport demo_halfmoon_figure(const ExperimentConfig& cfg, const std::string& out_dir) {
  ExperimentConfig c = cfg;
  c.data.kind = GeneratorKind::half_moon;
  if (c.model.hypotheses == 1) c.model.hypotheses = kHalfmoonDemoHypotheses;
  const Dataset ds = make_dataset(c.data);
  const std::size_t draws = 500;

  ExperimentConfig wta = c;
  wta.train.loss.kind = LossKind::wta;
  Generator g_wta = make_generator(model_for(wta, ds), wta.train.seed);
  train_plain(g_wta, ds.train, ds.valid, wta.train);

  ExperimentConfig con = c;
  con.train.loss.kind = LossKind::conad;
  Generator g_con = make_generator(model_for(con, ds), con.train.seed);
  Discriminator d_con = make_discriminator(model_for(con, ds), con.train.seed);
  train_adversarial(g_con, d_con, ds.train, ds.valid, con.train);

  const Tensor s_wta = sample_hypothesis_means(g_wta, draws, c.train.seed);
  const Tensor s_con = sample_hypothesis_means(g_con, draws, c.train.seed);
  const double f_wta = off_manifold_fraction(s_wta);
  const double f_con = off_manifold_fraction(s_con);

  DemoReport r;
  r.name = "halfmoon_figure";
  r.values = {{"hypotheses", static_cast<double>(c.model.hypotheses)},
              {"off_manifold_wta", f_wta},
              {"off_manifold_conad", f_con},
              {"ratio", f_wta / std::max(f_con, 1e-12)}};
  r.passed = f_wta >= 1.5 * f_con;
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    const svg::Bounds bounds{-1.6, 1.6, -1.6, 1.6};
    const std::string truth_color = "#1f77b4";
    for (const auto& [name, samples] : {std::pair{std::string("wta"), &s_wta}, std::pair{std::string("conad"), &s_con}}) {
      const std::vector<svg::PointSeries> series{{"training samples", truth_color, ds.train, 1.5},
                                                 {name + " hypothesis samples", "#d62728", *samples, 1.5}};
      const std::string file = "halfmoon_" + name + ".svg";
      svg::write_file(path_in(out_dir, file), svg::scatter(series, bounds, "flipped half moon: " + name));
      r.files.push_back(file);
    }
    svg::write_file(path_in(out_dir, "report.txt"), r.text());
  }
  return r;
}

DemoReport demo_strategy_figure(const ExperimentConfig& cfg, const std::string& out_dir) {
  ExperimentConfig c = cfg;
  c.data.kind = GeneratorKind::imbalanced_modes;
  if (c.model.hypotheses == 1) c.model.hypotheses = kStrategyDemoHypotheses;
  const Dataset ds = make_dataset(c.data);

  const std::size_t grid = 40;
  const double lo = -4.0, hi = 4.0;
  Tensor points(Shape{grid * grid, 2});
  for (std::size_t r = 0; r < grid; ++r) {
    for (std::size_t q = 0; q < grid; ++q) {
      points.at(r * grid + q, 0) = lo + (hi - lo) * (static_cast<double>(q) + 0.5) / grid;
      points.at(r * grid + q, 1) = hi - (hi - lo) * (static_cast<double>(r) + 0.5) / grid;
    }
  }

  struct Method {
    std::string name;
    LossKind kind;
    std::size_t heads;
  };
  const std::vector<Method> methods{{"vae", LossKind::vae, 1},
                                    {"mdn", LossKind::mdn, c.model.hypotheses},
                                    {"conad", LossKind::conad, c.model.hypotheses}};
  std::vector<std::vector<double>> maps;
  std::vector<std::string> captions;
  DemoReport rep;
  rep.name = "strategy_figure";
  for (const auto& m : methods) {
    ExperimentConfig e = c;
    e.train.loss.kind = m.kind;
    e.model.hypotheses = m.heads;
    Run run = run_experiment(e, ds);
    const ScoreMode mode = e.score.mode_for(e.train.loss);
    maps.push_back(rank_normalize(aggregate_rows(pixel_scores(run.gen, points, mode), 100.0)));
    captions.push_back(m.name);
    rep.values.emplace_back("auroc_" + m.name, run.eval.roc.auroc);
  }
  std::vector<Label> labels;
  const Tensor test = stack_test(ds, labels);
  rep.values.emplace_back("auroc_lof", auroc(lof_scores(ds.train, test, c.score.lof_k), labels).auroc);
  maps.push_back(rank_normalize(lof_scores(ds.train, points, c.score.lof_k)));
  captions.push_back("lof");
  rep.passed = true;
  for (const auto& [k, v] : rep.values) rep.passed = rep.passed && std::isfinite(v);
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    svg::write_file(path_in(out_dir, "strategy_figure.svg"), svg::heatmap_row(maps, grid, captions, 4.0));
    rep.files.push_back("strategy_figure.svg");
    svg::write_file(path_in(out_dir, "report.txt"), rep.text());
  }
  return rep;
}

DemoReport run_demo(const std::string& which, const ExperimentConfig& cfg, const std::string& out_dir) {
  if (which == "lemma41") return demo_lemma41(cfg, out_dir);
  if (which == "lemma42") return demo_lemma42(cfg, out_dir);
  if (which == "halfmoon_figure") return demo_halfmoon_figure(cfg, out_dir);
  if (which == "strategy_figure") return demo_strategy_figure(cfg, out_dir);
  throw ConfigError("unknown demo '" + which + "' (valid: lemma41, lemma42, halfmoon_figure, strategy_figure)");
}

}  // namespace conad
