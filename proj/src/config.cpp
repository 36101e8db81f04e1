#include "conad/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "conad/errors.hpp"

namespace conad {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_real(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(d)) {
    throw ConfigError(key + ": expected a real number, got '" + v + "'");
  }
  return d;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  if (v.empty() || !std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  errno = 0;
  const auto u = std::strtoull(v.c_str(), nullptr, 10);
  if (errno == ERANGE) throw ConfigError(key + ": integer out of range");
  return u;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_uint(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": expected a comma-separated list of widths");
  return out;
}

std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string widths_text(const std::vector<std::size_t>& w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) out += (i ? "," : "") + std::to_string(w[i]);
  return out;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<std::pair<std::string, Field>>& fields() {
  using C = ExperimentConfig;
  using S = const std::string&;
  static const std::vector<std::pair<std::string, Field>> table = {
      {"data.generator", {[](C& c, S, S v) { c.data.kind = parse_generator(v); },
                          [](const C& c) { return to_string(c.data.kind); }}},
      {"data.n", {[](C& c, S k, S v) { c.data.n = to_uint(k, v); },
                  [](const C& c) { return std::to_string(c.data.n); }}},
      {"data.noise", {[](C& c, S k, S v) { c.data.noise = to_real(k, v); },
                      [](const C& c) { return real_text(c.data.noise); }}},
      {"data.weight", {[](C& c, S k, S v) { c.data.weight = to_real(k, v); },
                       [](const C& c) { return real_text(c.data.weight); }}},
      {"data.side", {[](C& c, S k, S v) { c.data.side = to_uint(k, v); },
                     [](const C& c) { return std::to_string(c.data.side); }}},
      {"data.period", {[](C& c, S k, S v) { c.data.period = to_real(k, v); },
                       [](const C& c) { return real_text(c.data.period); }}},
      {"data.anomalies", {[](C& c, S k, S v) { c.data.anomalies = to_uint(k, v); },
                          [](const C& c) { return std::to_string(c.data.anomalies); }}},
      {"data.train_ratio", {[](C& c, S k, S v) { c.data.ratios.train = to_real(k, v); },
                            [](const C& c) { return real_text(c.data.ratios.train); }}},
      {"data.valid_ratio", {[](C& c, S k, S v) { c.data.ratios.valid = to_real(k, v); },
                            [](const C& c) { return real_text(c.data.ratios.valid); }}},
      {"data.test_ratio", {[](C& c, S k, S v) { c.data.ratios.test = to_real(k, v); },
                           [](const C& c) { return real_text(c.data.ratios.test); }}},
      {"data.seed", {[](C& c, S k, S v) { c.data.seed = to_uint(k, v); },
                     [](const C& c) { return std::to_string(c.data.seed); }}},

      {"model.hypotheses", {[](C& c, S k, S v) { c.model.hypotheses = to_uint(k, v); },
                            [](const C& c) { return std::to_string(c.model.hypotheses); }}},
      {"model.latent_dim", {[](C& c, S k, S v) { c.model.latent_dim = to_uint(k, v); },
                            [](const C& c) { return std::to_string(c.model.latent_dim); }}},
      {"model.hypothesis_discrimination",
       {[](C& c, S k, S v) { c.model.hypothesis_discrimination = to_bool(k, v); },
        [](const C& c) { return std::string(c.model.hypothesis_discrimination ? "true" : "false"); }}},
      {"model.encoder_hidden", {[](C& c, S k, S v) { c.model.encoder_hidden = to_widths(k, v); },
                                [](const C& c) { return widths_text(c.model.encoder_hidden); }}},
      {"model.trunk_hidden", {[](C& c, S k, S v) { c.model.trunk_hidden = to_widths(k, v); },
                              [](const C& c) { return widths_text(c.model.trunk_hidden); }}},
      {"model.disc_hidden", {[](C& c, S k, S v) { c.model.disc_hidden = to_widths(k, v); },
                             [](const C& c) { return widths_text(c.model.disc_hidden); }}},
      {"model.disc_features", {[](C& c, S k, S v) { c.model.disc_features = to_uint(k, v); },
                               [](const C& c) { return std::to_string(c.model.disc_features); }}},

      {"loss.kind", {[](C& c, S, S v) { c.train.loss.kind = parse_loss_kind(v); },
                     [](const C& c) { return std::string(to_string(c.train.loss.kind)); }}},
      {"loss.epsilon", {[](C& c, S k, S v) { c.train.loss.epsilon = to_real(k, v); },
                        [](const C& c) { return real_text(c.train.loss.epsilon); }}},
      {"loss.granularity", {[](C& c, S, S v) { c.train.loss.granularity = parse_granularity(v); },
                            [](const C& c) { return std::string(to_string(c.train.loss.granularity)); }}},
      {"loss.adv_weight", {[](C& c, S k, S v) { c.train.loss.adv_weight = to_real(k, v); },
                           [](const C& c) { return real_text(c.train.loss.adv_weight); }}},
      {"loss.kl_weight", {[](C& c, S k, S v) { c.train.loss.kl_weight = to_real(k, v); },
                          [](const C& c) { return real_text(c.train.loss.kl_weight); }}},
      {"loss.symmetrized_kl", {[](C& c, S k, S v) { c.train.loss.symmetrized_kl = to_bool(k, v); },
                               [](const C& c) { return std::string(c.train.loss.symmetrized_kl ? "true" : "false"); }}},

      {"train.lr", {[](C& c, S k, S v) { c.train.lr = to_real(k, v); },
                    [](const C& c) { return real_text(c.train.lr); }}},
      {"train.batch_size", {[](C& c, S k, S v) { c.train.batch_size = to_uint(k, v); },
                            [](const C& c) { return std::to_string(c.train.batch_size); }}},
      {"train.epochs_max", {[](C& c, S k, S v) { c.train.epochs_max = to_uint(k, v); },
                            [](const C& c) { return std::to_string(c.train.epochs_max); }}},
      {"train.patience", {[](C& c, S k, S v) { c.train.patience = to_uint(k, v); },
                          [](const C& c) { return std::to_string(c.train.patience); }}},
      {"train.gen_epochs_per_disc", {[](C& c, S k, S v) { c.train.gen_epochs_per_disc = to_uint(k, v); },
                                     [](const C& c) { return std::to_string(c.train.gen_epochs_per_disc); }}},
      {"train.seed", {[](C& c, S k, S v) { c.train.seed = to_uint(k, v); },
                      [](const C& c) { return std::to_string(c.train.seed); }}},
      {"train.record_wall_time", {[](C& c, S k, S v) { c.train.record_wall_time = to_bool(k, v); },
                                  [](const C& c) { return std::string(c.train.record_wall_time ? "true" : "false"); }}},

      {"score.mode", {[](C& c, S, S v) {
                        if (v == "auto") c.score.mode.reset(); else c.score.mode = parse_score_mode(v);
                      },
                      [](const C& c) { return c.score.mode ? std::string(to_string(*c.score.mode)) : "auto"; }}},
      {"score.top_percent", {[](C& c, S k, S v) {
                               if (v == "auto") c.score.top_percent.reset(); else c.score.top_percent = to_real(k, v);
                             },
                             [](const C& c) {
                               return c.score.top_percent ? real_text(*c.score.top_percent) : std::string("auto");
                             }}},
      {"score.lof_k", {[](C& c, S k, S v) { c.score.lof_k = to_uint(k, v); },
                       [](const C& c) { return std::to_string(c.score.lof_k); }}},
      {"score.heatmaps", {[](C& c, S k, S v) { c.score.heatmaps = to_uint(k, v); },
                          [](const C& c) { return std::to_string(c.score.heatmaps); }}},
  };
  return table;
}

}  // namespace

ScoreMode ScoreConfig::mode_for(const LossConfig& loss) const {
  if (mode) return *mode;
  return loss.uses_mixture() ? ScoreMode::mdn_global : ScoreMode::wta_local;
}

double ScoreConfig::top_percent_for(bool image_data) const {
  return top_percent ? *top_percent : default_top_percent(image_data);
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(*this, key, value);
      return;
    }
  }
  std::string known;
  for (const auto& [name, field] : fields()) known += (known.empty() ? "" : ", ") + name;
  throw ConfigError("unknown config key '" + key + "' (known: " + known + ")");
}

void ExperimentConfig::validate() const {
  data.validate();
  model.validate();
  train.validate(model.hypotheses);
  if (score.top_percent && !(*score.top_percent > 0.0 && *score.top_percent <= 100.0)) {
    throw ConfigError("score.top_percent must lie in (0, 100]");
  }
  if (score.lof_k == 0) throw ConfigError("score.lof_k must be positive");
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + " = " + field.get(*this) + "\n";
  return out;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig c;
  std::istringstream is(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(is, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    try {
      const auto [k, v] = split_assignment(t);
      c.set(k, v);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(number) + ": " + e.what());
    }
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::vector<std::string> ExperimentConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [name, field] : fields()) out.push_back(name);
  return out;
}

std::pair<std::string, std::string> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + s + "'");
  const std::string k = trim(s.substr(0, eq));
  if (k.empty()) throw ConfigError("empty key in '" + s + "'");
  return {k, trim(s.substr(eq + 1))};
}

}  // namespace conad
