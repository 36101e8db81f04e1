#include "conad/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "conad/errors.hpp"
#include "conad/kernels.hpp"

namespace conad {

using namespace ad;

namespace {

constexpr double kDistanceFloor = 1e-12;

void require_finite_params(Generator& gen) {
  for (const auto& p : gen.parameters()) {
    if (!p.tensor->all_finite()) throw NumericalError("parameter '" + p.name + "' is not finite");
  }
}

}  // namespace

ScoreMode parse_score_mode(std::string_view s) {
  if (s == "wta_local") return ScoreMode::wta_local;
  if (s == "mdn_global") return ScoreMode::mdn_global;
  throw ConfigError("unknown score mode '" + std::string(s) + "' (valid: wta_local, mdn_global)");
}

std::string_view to_string(ScoreMode m) { return m == ScoreMode::wta_local ? "wta_local" : "mdn_global"; }

Tensor pixel_scores(Generator& gen, const Tensor& x, ScoreMode mode) {
  require_finite_params(gen);
  if (x.rank() != 2 || x.cols() != gen.config().data_dim) {
    throw ConfigError("scoring input of shape " + shape_string(x.shape()) + " does not match model.data_dim " +
                      std::to_string(gen.config().data_dim));
  }
  Tape tape;
  tape.set_grad_enabled(false);
  const Var xv = tape.constant(x);
  const HypothesisSet h = gen.decode(tape, gen.encode(tape, xv).mu);

  const std::size_t n = x.rows(), d = x.cols(), heads = h.size();
  std::vector<const Tensor*> mu(heads), ls(heads);
  for (std::size_t k = 0; k < heads; ++k) {
    mu[k] = &h.heads[k].mu.value();
    ls[k] = &h.heads[k].log_sigma.value();
  }
  // Per-sample log mixing weights.
  Tensor log_alpha(Shape{n, heads}, -std::log(static_cast<double>(heads)));
  if (mode == ScoreMode::mdn_global && h.mixing_logits) {
    const Tensor& logits = h.mixing_logits->value();
    for (std::size_t i = 0; i < n; ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < heads; ++k) m = std::max(m, logits.at(i, k));
      double s = 0.0;
      for (std::size_t k = 0; k < heads; ++k) s += std::exp(logits.at(i, k) - m);
      for (std::size_t k = 0; k < heads; ++k) log_alpha.at(i, k) = logits.at(i, k) - m - std::log(s);
    }
  }

  Tensor out(Shape{n, d});
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    std::vector<double> terms(heads);
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t e = i * d + j;
      if (mode == ScoreMode::wta_local) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < heads; ++k) best = std::min(best, pixel_nll(x[e], (*mu[k])[e], (*ls[k])[e]));
        out[e] = best;
      } else {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < heads; ++k) {
          terms[k] = log_alpha.at(i, k) - pixel_nll(x[e], (*mu[k])[e], (*ls[k])[e]);
          m = std::max(m, terms[k]);
        }
        double s = 0.0;
        for (std::size_t k = 0; k < heads; ++k) s += std::exp(terms[k] - m);
        out[e] = -(m + std::log(s));
      }
    }
  }
  if (!out.all_finite()) throw NumericalError("pixel scores are not finite");
  return out;
}

double aggregate(std::span<const double> pixel_nll, double top_percent) {
  if (pixel_nll.empty()) throw ContractError("aggregate: empty score map");
  if (!(top_percent > 0.0 && top_percent <= 100.0)) {
    throw ConfigError("score.top_percent must lie in (0, 100], got " + std::to_string(top_percent));
  }
  const double want = std::ceil(static_cast<double>(pixel_nll.size()) * top_percent / 100.0 - 1e-9);
  const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(want), 1, pixel_nll.size());
  std::vector<double> v(pixel_nll.begin(), pixel_nll.end());
  if (k < v.size()) {
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), std::greater<>());
  }
  // Summing in descending order makes the result independent of pixel order.
  std::sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), std::greater<>());
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += v[i];
  return s;
}

std::vector<double> aggregate_rows(const Tensor& pixel_nll, double top_percent) {
  std::vector<double> out(pixel_nll.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = aggregate(pixel_nll.row(i), top_percent);
  return out;
}

double default_top_percent(bool image_data) { return image_data ? 10.0 : 100.0; }

RocResult auroc(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auroc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t n_anom = 0;
  for (Label l : labels) n_anom += l == Label::anomaly ? 1 : 0;
  const std::size_t n_norm = n - n_anom;
  if (n_anom == 0 || n_norm == 0) throw ContractError("auroc needs both normal and anomalous samples");
  for (double s : scores) {
    if (std::isnan(s)) throw NumericalError("auroc: NaN score");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average ranks (1-based) over tie blocks.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == Label::anomaly) rank_sum += avg;
    }
    i = j;
  }
  const double na = static_cast<double>(n_anom), nn = static_cast<double>(n_norm);
  RocResult r;
  r.auroc = (rank_sum - na * (na + 1.0) / 2.0) / (na * nn);

  r.thresholds.push_back(std::numeric_limits<double>::infinity());
  r.tpr.push_back(0.0);
  r.fpr.push_back(0.0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = n; i > 0;) {
    std::size_t j = i;
    const double s = scores[order[i - 1]];
    while (j > 0 && scores[order[j - 1]] == s) {
      if (labels[order[j - 1]] == Label::anomaly) ++tp; else ++fp;
      --j;
    }
    r.thresholds.push_back(s);
    r.tpr.push_back(static_cast<double>(tp) / na);
    r.fpr.push_back(static_cast<double>(fp) / nn);
    i = j;
  }
  return r;
}

std::vector<double> normalize_minmax(std::span<const double> scores) {
  std::vector<double> out(scores.begin(), scores.end());
  if (out.empty()) return out;
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double a = *lo, range = *hi - *lo;
  for (double& v : out) v = range > 0.0 ? (v - a) / range : 0.0;
  return out;
}

namespace {

struct LofModel {
  std::vector<double> kdist;
  std::vector<double> lrd;
};

double row_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

// k-th smallest of the distances to the candidate neighbours.
double k_distance(std::span<const double> dists, std::size_t k, std::vector<double>& scratch) {
  scratch.assign(dists.begin(), dists.end());
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1), scratch.end());
  return scratch[k - 1];
}

LofModel fit_lof(const Tensor& points, std::size_t k, std::vector<double>& dist,
                 std::vector<std::vector<std::size_t>>& neighbours) {
  const std::size_t n = points.rows(), d = points.cols();
  dist.assign(n * n, 0.0);
  kernels::pairwise_distances(points.data(), dist, n, d);
  LofModel m{std::vector<double>(n), std::vector<double>(n)};
  neighbours.assign(n, {});
  std::vector<double> others, scratch;
  for (std::size_t i = 0; i < n; ++i) {
    others.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(dist[i * n + j]);
    }
    m.kdist[i] = k_distance(others, k, scratch);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && dist[i * n + j] <= m.kdist[i]) neighbours[i].push_back(j);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j : neighbours[i]) s += std::max({m.kdist[j], dist[i * n + j], kDistanceFloor});
    m.lrd[i] = static_cast<double>(neighbours[i].size()) / s;
  }
  return m;
}

void check_lof_args(std::size_t n, std::size_t k) {
  if (k == 0 || k >= n) {
    throw ConfigError("LOF needs 0 < k < number of points (k=" + std::to_string(k) + ", n=" + std::to_string(n) +
                      ")");
  }
}

}  // namespace

std::vector<double> lof_scores(const Tensor& points, std::size_t k) {
  if (points.rank() != 2) throw ShapeError("lof_scores expects a (n, d) matrix");
  const std::size_t n = points.rows();
  check_lof_args(n, k);
  std::vector<double> dist;
  std::vector<std::vector<std::size_t>> neighbours;
  const LofModel m = fit_lof(points, k, dist, neighbours);
  std::vector<double> lof(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j : neighbours[i]) s += m.lrd[j];
    lof[i] = s / (static_cast<double>(neighbours[i].size()) * m.lrd[i]);
  }
  return lof;
}

std::vector<double> lof_scores(const Tensor& reference, const Tensor& queries, std::size_t k) {
  if (reference.rank() != 2 || queries.rank() != 2 || reference.cols() != queries.cols()) {
    throw ShapeError("lof_scores: reference and queries must be matrices of equal width");
  }
  const std::size_t n = reference.rows();
  check_lof_args(n + 1, k);
  std::vector<double> dist;
  std::vector<std::vector<std::size_t>> neighbours;
  const LofModel m = fit_lof(reference, k, dist, neighbours);
  std::vector<double> out(queries.rows());
  const auto rows = static_cast<std::ptrdiff_t>(queries.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t qi = 0; qi < rows; ++qi) {
    const auto q = static_cast<std::size_t>(qi);
    std::vector<double> dq(n), scratch;
    for (std::size_t j = 0; j < n; ++j) dq[j] = row_distance(queries.row(q), reference.row(j));
    const double kd = k_distance(dq, k, scratch);
    double reach = 0.0, lrd_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (dq[j] > kd) continue;
      reach += std::max({m.kdist[j], dq[j], kDistanceFloor});
      lrd_sum += m.lrd[j];
      ++count;
    }
    const double lrd_q = static_cast<double>(count) / reach;
    out[q] = lrd_sum / (static_cast<double>(count) * lrd_q);
  }
  return out;
}

}  // namespace conad
