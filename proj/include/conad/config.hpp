#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "conad/data.hpp"
#include "conad/models.hpp"
#include "conad/scoring.hpp"
#include "conad/training.hpp"

namespace conad {

struct ScoreConfig {
  std::optional<ScoreMode> mode;       // unset: mdn_global for mixture losses, else wta_local
  std::optional<double> top_percent;   // unset: 10 for images, 100 for points
  std::size_t lof_k = 20;
  std::size_t heatmaps = 4;  // image samples rendered per label

  ScoreMode mode_for(const LossConfig& loss) const;
  double top_percent_for(bool image_data) const;
};

// Flat key=value configuration over data.*, model.*, loss.*, train.* and
// score.*. Lines starting with '#' are comments.
struct ExperimentConfig {
  GeneratorParams data;
  ModelConfig model;
  TrainConfig train;
  ScoreConfig score;

  // Sets one key; unknown keys and malformed values throw ConfigError.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  // Canonical text form; parsing it back yields the same configuration.
  std::string to_text() const;

  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  static std::vector<std::string> keys();
};

// Splits "key=value"; throws ConfigError on a missing '='.
std::pair<std::string, std::string> split_assignment(const std::string& s);

}  // namespace conad
