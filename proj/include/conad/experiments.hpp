#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "conad/config.hpp"
#include "conad/data.hpp"
#include "conad/scoring.hpp"
#include "conad/training.hpp"

namespace conad {

// Test normals followed by test anomalies, with matching labels.
Tensor stack_test(const Dataset& ds, std::vector<Label>& labels);

struct Evaluation {
  Tensor inputs;
  std::vector<Label> labels;
  Tensor pixel;                   // (n, D) per-pixel scores
  std::vector<double> aggregate;  // one per sample
  RocResult roc;
};

Evaluation evaluate(Generator& gen, const Tensor& inputs, std::vector<Label> labels, ScoreMode mode,
                    double top_percent);
Evaluation evaluate(Generator& gen, const Dataset& ds, ScoreMode mode, double top_percent);

// Model configuration for a dataset: data_dim from the data, a mixing head
// exactly when the loss needs one.
ModelConfig model_for(const ExperimentConfig& cfg, const Dataset& ds);

struct Run {
  Generator gen;
  Discriminator disc;
  TrainReport report;
  Evaluation eval;
};

// Initializes from train.seed, trains and evaluates on the test split.
Run run_experiment(const ExperimentConfig& cfg, const Dataset& ds);

// Means of every hypothesis decoded from `draws` prior latents, (draws * H, D).
Tensor sample_hypothesis_means(Generator& gen, std::size_t draws, std::uint64_t seed);

// Share of hypothesis means farther than `threshold` from the half-moon arcs.
double off_manifold_fraction(const Tensor& samples, double threshold = 0.1);

// --- demonstrations -----------------------------------------------------------

struct DemoReport {
  std::string name;
  std::vector<std::pair<std::string, double>> values;
  bool passed = false;
  std::vector<std::string> files;

  double value(const std::string& key) const;
  std::string text() const;
};

inline const std::vector<std::string> kDemoNames{"lemma41", "lemma42", "halfmoon_figure", "strategy_figure"};

// Hypothesis counts the figure demos use when the config leaves model.hypotheses at 1.
inline constexpr std::size_t kHalfmoonDemoHypotheses = 8;
inline constexpr std::size_t kStrategyDemoHypotheses = 4;

// Trains a plain WTA model, appends as many far-offset heads as it already
// has and measures the change in the WTA energy at both granularities.
DemoReport demo_lemma41(const ExperimentConfig& cfg, const std::string& out_dir);
// Soft-WTA limits against WTA and the uniform hypothesis mean on random
// instances, plus an epsilon sweep chart.
DemoReport demo_lemma42(const ExperimentConfig& cfg, const std::string& out_dir);
// WTA versus ConAD samples on the flipped half moon.
DemoReport demo_halfmoon_figure(const ExperimentConfig& cfg, const std::string& out_dir);
// Score maps of VAE, MDN, ConAD and LOF on the imbalanced two-mode data.
DemoReport demo_strategy_figure(const ExperimentConfig& cfg, const std::string& out_dir);

DemoReport run_demo(const std::string& which, const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace conad
