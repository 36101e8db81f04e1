#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "conad/models.hpp"

namespace conad {

enum class ScoreMode { wta_local, mdn_global };

ScoreMode parse_score_mode(std::string_view s);
std::string_view to_string(ScoreMode m);

enum class Label : std::uint8_t { normal = 0, anomaly = 1 };

struct ScoredSample {
  std::vector<double> pixel_nll;
  double aggregate = 0.0;
  Label label = Label::normal;
};

// Per-pixel anomaly scores (n, D) with z at the posterior mean.
// wta_local: NLL under the best hypothesis of each pixel.
// mdn_global: NLL of the per-pixel mixture, weighted by the mixing head or
// uniformly when the model has none.
Tensor pixel_scores(Generator& gen, const Tensor& x, ScoreMode mode);

// Sum of the ceil(D * p / 100) largest entries, added largest first.
// p in (0, 100].
double aggregate(std::span<const double> pixel_nll, double top_percent);
std::vector<double> aggregate_rows(const Tensor& pixel_nll, double top_percent);

double default_top_percent(bool image_data);

struct RocResult {
  double auroc = 0.5;
  // Sweep from +inf down to the lowest score; a sample is flagged when its
  // score is >= the threshold.
  std::vector<double> thresholds;
  std::vector<double> tpr;
  std::vector<double> fpr;
};

// Mann-Whitney statistic with average ranks for ties. Needs both labels.
RocResult auroc(std::span<const double> scores, std::span<const Label> labels);

// Min-max scaling to [0, 1]; constant input maps to 0.
std::vector<double> normalize_minmax(std::span<const double> scores);

// Local outlier factor of every row of `points` with k neighbours; ties at
// the k-distance are included in the neighbourhood. Reachability distances
// are floored at 1e-12.
std::vector<double> lof_scores(const Tensor& points, std::size_t k);

// Novelty LOF: each query is scored against densities fitted on `reference`
// alone. Its neighbourhood is drawn from the reference rows, whose own
// k-distances and densities stay as fitted.
std::vector<double> lof_scores(const Tensor& reference, const Tensor& queries, std::size_t k);

}  // namespace conad
