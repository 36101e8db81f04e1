#include "conad/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "conad/errors.hpp"
#include "conad/experiments.hpp"
#include "conad/svg.hpp"

namespace conad {

namespace {

std::string path_in(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void prepare(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create output directory '" + out_dir + "': " + ec.message());
  svg::write_file(path_in(out_dir, "config.txt"), cfg.to_text());
}

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Generator parameters followed by discriminator parameters.
ParamList checkpoint_params(Generator& gen, Discriminator& disc) {
  ParamList p = gen.parameters();
  const ParamList d = disc.parameters();
  p.insert(p.end(), d.begin(), d.end());
  return p;
}

}  // namespace

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const ConfigError&) {
    return kExitConfig;
  } catch (const ContractError&) {
    return kExitConfig;
  } catch (const DataError&) {
    return kExitData;
  } catch (const NumericalError&) {
    return kExitNumerical;
  } catch (...) {
    return kExitOther;
  }
}

void cmd_gen(const ExperimentConfig& cfg, const std::string& out_dir) {
  prepare(cfg, out_dir);
  save_dataset(make_dataset(cfg.data), out_dir);
}

void cmd_train(const ExperimentConfig& cfg, const std::string& data_dir, const std::string& out_dir) {
  cfg.validate();
  const Dataset ds = load_dataset(data_dir);
  prepare(cfg, out_dir);
  const ModelConfig mc = model_for(cfg, ds);
  Generator gen = make_generator(mc, cfg.train.seed);
  Discriminator disc = make_discriminator(mc, cfg.train.seed);
  TrainReport report = train(gen, disc, ds.train, ds.valid, cfg.train);
  report.checkpoint_path = path_in(out_dir, "model.ckpt");
  save_checkpoint(report.checkpoint_path, checkpoint_params(gen, disc));
  write_report_csv(path_in(out_dir, "train_report.csv"), report);

  std::string s;
  s += "loss " + std::string(to_string(cfg.train.loss.kind)) + "\n";
  s += "initial_val_loss " + real(report.initial_val_loss) + "\n";
  s += "best_val_loss " + real(report.best_val_loss) + "\n";
  s += "best_epoch " + std::to_string(report.best_epoch) + "\n";
  s += "stopping_epoch " + std::to_string(report.stopping_epoch) + "\n";
  s += "generator_updates " + std::to_string(report.generator_updates) + "\n";
  s += "discriminator_updates " + std::to_string(report.discriminator_updates) + "\n";
  s += "schedule " + (report.schedule.empty() ? std::string("-") : report.schedule) + "\n";
  s += "wall_seconds " + real(report.wall_seconds) + "\n";
  s += "checkpoint model.ckpt\n";
  svg::write_file(path_in(out_dir, "train_summary.txt"), s);
}

void cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint, const std::string& data_dir,
              const std::string& out_dir, const std::string& split) {
  cfg.validate();
  const Dataset ds = load_dataset(data_dir);
  if (split != "test") {
    if (split != "train" && split != "valid") {
      throw ConfigError("unknown split '" + split + "' (valid: test, train, valid)");
    }
    throw ConfigError("evaluation needs normal and anomalous samples; split '" + split + "' holds normals only");
  }
  const ModelConfig mc = model_for(cfg, ds);
  Generator gen = make_generator(mc, cfg.train.seed);
  Discriminator disc = make_discriminator(mc, cfg.train.seed);
  load_checkpoint(checkpoint, checkpoint_params(gen, disc));
  prepare(cfg, out_dir);

  const ScoreMode mode = cfg.score.mode_for(cfg.train.loss);
  const double top = cfg.score.top_percent_for(ds.is_image());
  const Evaluation e = evaluate(gen, ds, mode, top);
  const std::vector<double> norm = normalize_minmax(e.aggregate);

  std::string csv = "sample_id,label,aggregate,normalized\n";
  for (std::size_t i = 0; i < e.aggregate.size(); ++i) {
    csv += std::to_string(i) + "," + (e.labels[i] == Label::anomaly ? "anomaly" : "normal") + "," +
           real(e.aggregate[i]) + "," + real(norm[i]) + "\n";
  }
  csv += "auroc,," + real(e.roc.auroc) + ",\n";
  svg::write_file(path_in(out_dir, "scores.csv"), csv);

  std::string roc = "threshold,tpr,fpr\n";
  for (std::size_t i = 0; i < e.roc.thresholds.size(); ++i) {
    roc += real(e.roc.thresholds[i]) + "," + real(e.roc.tpr[i]) + "," + real(e.roc.fpr[i]) + "\n";
  }
  svg::write_file(path_in(out_dir, "roc.csv"), roc);

  std::string summary = "auroc " + real(e.roc.auroc) + "\n";
  summary += "score_mode " + std::string(to_string(mode)) + "\n";
  summary += "top_percent " + real(top) + "\n";
  summary += "normal " + std::to_string(ds.test_normal.rows()) + "\n";
  summary += "anomaly " + std::to_string(ds.test_anomaly.rows()) + "\n";

  if (ds.is_image()) {
    const std::size_t nn = ds.test_normal.rows();
    for (const Label want : {Label::normal, Label::anomaly}) {
      const std::size_t begin = want == Label::normal ? 0 : nn;
      const std::size_t end = want == Label::normal ? nn : e.aggregate.size();
      for (std::size_t i = begin; i < end && i - begin < cfg.score.heatmaps; ++i) {
        // The input is drawn inverted so dark defects stay dark.
        std::vector<std::vector<double>> shown{
            std::vector<double>(e.inputs.row(i).begin(), e.inputs.row(i).end()),
            std::vector<double>(e.pixel.row(i).begin(), e.pixel.row(i).end())};
        for (double& v : shown[0]) v = 1.0 - v;
        const std::string label = want == Label::anomaly ? "anomaly" : "normal";
        const std::string file = "heatmap_" + label + "_" + std::to_string(i) + ".svg";
        svg::write_file(path_in(out_dir, file),
                        svg::heatmap_row(shown, ds.side, {"input " + std::to_string(i), "pixel score"}));
      }
    }
  } else if (ds.dim == 2) {
    const double lof = auroc(lof_scores(ds.train, e.inputs, cfg.score.lof_k), e.labels).auroc;
    summary += "lof_auroc " + real(lof) + "\n";
    const std::vector<svg::PointSeries> series{
        {"hypothesis samples", "#999999", sample_hypothesis_means(gen, 200, cfg.train.seed), 1.2},
        {"test normal", "#1f77b4", ds.test_normal, 2.0},
        {"test anomaly", "#d62728", ds.test_anomaly, 2.0}};
    svg::write_file(path_in(out_dir, "scatter.svg"),
                    svg::scatter(series, svg::fit_bounds(series), "test split and model samples"));
  }
  svg::write_file(path_in(out_dir, "eval_summary.txt"), summary);
}

bool cmd_demo(const std::string& which, const ExperimentConfig& cfg, const std::string& out_dir) {
  prepare(cfg, out_dir);
  return run_demo(which, cfg, out_dir).passed;
}

}  // namespace conad
