#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "conad/commands.hpp"
#include "conad/errors.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key=value configuration file");
  cmd->add_option("--set", c.sets, "override one key, e.g. --set model.hypotheses=4");
  cmd->add_option("--out", c.out, "output directory")->required();
}

conad::ExperimentConfig resolve(const Common& c) {
  conad::ExperimentConfig cfg = c.config.empty() ? conad::ExperimentConfig{} : conad::ExperimentConfig::load(c.config);
  for (const auto& s : c.sets) {
    const auto [k, v] = conad::split_assignment(s);
    cfg.set(k, v);
  }
  if (const char* seed = std::getenv("CONAD_SEED"); seed != nullptr && *seed != '\0') {
    cfg.set("train.seed", seed);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple-hypotheses VAE anomaly detection"};
  app.require_subcommand(1);

  Common gen_opts, train_opts, eval_opts, demo_opts;
  std::string train_data, eval_data, checkpoint, split = "test", demo_name;

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  add_common(gen, gen_opts);

  auto* train = app.add_subcommand("train", "train a model on a dataset");
  add_common(train, train_opts);
  train->add_option("--data", train_data, "dataset directory")->required();

  auto* eval = app.add_subcommand("eval", "score a dataset with a trained model");
  add_common(eval, eval_opts);
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  eval->add_option("--split", split, "test, train or valid");

  auto* demo = app.add_subcommand("demo", "run a scripted demonstration");
  add_common(demo, demo_opts);
  demo->add_option("which", demo_name, "lemma41, lemma42, halfmoon_figure or strategy_figure")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? conad::kExitOk : conad::kExitConfig;
  }

  try {
    if (*gen) {
      conad::cmd_gen(resolve(gen_opts), gen_opts.out);
    } else if (*train) {
      conad::cmd_train(resolve(train_opts), train_data, train_opts.out);
    } else if (*eval) {
      conad::cmd_eval(resolve(eval_opts), checkpoint, eval_data, eval_opts.out, split);
    } else if (*demo) {
      const bool passed = conad::cmd_demo(demo_name, resolve(demo_opts), demo_opts.out);
      std::printf("demo %s: %s\n", demo_name.c_str(), passed ? "PASS" : "FAIL");
      return passed ? conad::kExitOk : conad::kExitOther;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "conad: %s\n", e.what());
    return conad::exit_code_for_current_exception();
  }
  return conad::kExitOk;
}
