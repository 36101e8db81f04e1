#include "conad/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "conad/errors.hpp"

namespace conad {

namespace {

constexpr double kPi = std::numbers::pi;
// Upper arc angles [pi/3, pi], lower arc angles [-pi/2, 0].
constexpr double kUpperBegin = kPi / 3.0;
constexpr double kUpperEnd = kPi;
constexpr double kLowerBegin = -kPi / 2.0;
constexpr double kLowerEnd = 0.0;

constexpr std::uint64_t kStreamNormal = 1;
constexpr std::uint64_t kStreamSplit = 2;
constexpr std::uint64_t kStreamAnomaly = 3;

double arc_distance(double x, double y, double begin, double end) {
  const double r = std::hypot(x, y);
  const double phi = std::atan2(y, x);
  if (phi >= begin && phi <= end) return std::abs(r - 1.0);
  const double d0 = std::hypot(x - std::cos(begin), y - std::sin(begin));
  const double d1 = std::hypot(x - std::cos(end), y - std::sin(end));
  return std::min(d0, d1);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void SplitRatios::validate() const {
  if (train < 0 || valid < 0 || test < 0 || std::abs(train + valid + test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1, got " + format_double(train) + "/" +
                      format_double(valid) + "/" + format_double(test));
  }
}

GeneratorKind parse_generator(const std::string& s) {
  if (s == "half_moon") return GeneratorKind::half_moon;
  if (s == "imbalanced_modes") return GeneratorKind::imbalanced_modes;
  if (s == "texture") return GeneratorKind::texture;
  throw ConfigError("unknown generator '" + s + "' (valid: half_moon, imbalanced_modes, texture)");
}

std::string to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::half_moon: return "half_moon";
    case GeneratorKind::imbalanced_modes: return "imbalanced_modes";
    case GeneratorKind::texture: return "texture";
  }
  return "?";
}

double GeneratorParams::effective_noise() const {
  if (noise >= 0.0) return noise;
  switch (kind) {
    case GeneratorKind::half_moon: return 0.03;
    case GeneratorKind::imbalanced_modes: return kModeSigma;
    case GeneratorKind::texture: return 0.05;
  }
  return 0.0;
}

void GeneratorParams::validate() const {
  ratios.validate();
  if (kind == GeneratorKind::half_moon && n < 10) throw ConfigError("half_moon needs n >= 10");
  if (n < 3) throw ConfigError("data.n must be at least 3");
  if (kind == GeneratorKind::imbalanced_modes && !(weight > 0.5 && weight < 1.0)) {
    throw ConfigError("data.weight must lie in (0.5, 1)");
  }
  if (kind == GeneratorKind::texture && (side < 8 || side > 32)) {
    throw ConfigError("data.side must lie in [8, 32]");
  }
  if (kind == GeneratorKind::texture && !(period > 0.0)) throw ConfigError("data.period must be positive");
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

// --- half moon --------------------------------------------------------------

Tensor sample_half_moon(std::size_t n, double noise, std::mt19937_64& rng) {
  const double upper_len = kUpperEnd - kUpperBegin;
  const double lower_len = kLowerEnd - kLowerBegin;
  std::uniform_real_distribution<double> u(0.0, upper_len + lower_len);
  std::normal_distribution<double> eps(0.0, 1.0);
  Tensor out(Shape{n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const double s = u(rng);
    const double angle = s < upper_len ? kUpperBegin + s : kLowerBegin + (s - upper_len);
    double x = std::cos(angle);
    double y = std::sin(angle);
    if (noise > 0.0) {
      x += noise * eps(rng);
      y += noise * eps(rng);
    }
    out.at(i, 0) = x;
    out.at(i, 1) = y;
  }
  return out;
}

double half_moon_distance(double x, double y) {
  return std::min(arc_distance(x, y, kUpperBegin, kUpperEnd), arc_distance(x, y, kLowerBegin, kLowerEnd));
}

namespace {

Tensor sample_half_moon_anomalies(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  Tensor out(Shape{n, 2});
  for (std::size_t i = 0; i < n;) {
    const double x = u(rng), y = u(rng);
    if (half_moon_distance(x, y) <= 0.25) continue;
    out.at(i, 0) = x;
    out.at(i, 1) = y;
    ++i;
  }
  return out;
}

}  // namespace

// --- imbalanced modes -------------------------------------------------------

Tensor sample_imbalanced_modes(std::size_t n, double weight, std::mt19937_64& rng) {
  std::bernoulli_distribution dominant(weight);
  std::normal_distribution<double> eps(0.0, kModeSigma);
  Tensor out(Shape{n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const double cx = dominant(rng) ? -kModeCenter : kModeCenter;
    out.at(i, 0) = cx + eps(rng);
    out.at(i, 1) = eps(rng);
  }
  return out;
}

Tensor sample_mode_anomalies(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  Tensor out(Shape{n, 2});
  for (std::size_t i = 0; i < n;) {
    const double x = u(rng), y = u(rng);
    if (std::hypot(x + kModeCenter, y) <= 1.0 || std::hypot(x - kModeCenter, y) <= 1.0) continue;
    out.at(i, 0) = x;
    out.at(i, 1) = y;
    ++i;
  }
  return out;
}

// --- texture ----------------------------------------------------------------

Tensor render_grating(std::size_t side, double period, double phase) {
  Tensor img(Shape{side * side});
  for (std::size_t r = 0; r < side; ++r) {
    const double v = kGratingMean + kGratingAmplitude * std::sin(2.0 * kPi * static_cast<double>(r) / period + phase);
    for (std::size_t c = 0; c < side; ++c) img[r * side + c] = v;
  }
  return img;
}

TextureSample sample_texture(std::size_t side, double period, double noise, bool anomalous,
                             std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::normal_distribution<double> eps(0.0, 1.0);
  TextureSample s{render_grating(side, period, phase(rng)), Tensor()};
  s.image = s.clean;
  if (noise > 0.0) {
    for (double& v : s.image.data()) v += noise * eps(rng);
  }
  if (anomalous) {
    std::uniform_int_distribution<int> count(1, 3);
    std::uniform_int_distribution<std::size_t> center(0, side - 1);
    std::uniform_real_distribution<double> radius(1.0, 3.0);
    std::uniform_real_distribution<double> angle(0.0, kPi);
    std::vector<bool> mask(side * side, false);
    const int blobs = count(rng);
    for (int b = 0; b < blobs; ++b) {
      const double r0 = static_cast<double>(center(rng));
      const double c0 = static_cast<double>(center(rng));
      const double ra = radius(rng), rb = radius(rng), th = angle(rng);
      const double ct = std::cos(th), st = std::sin(th);
      for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
          const double dr = static_cast<double>(r) - r0;
          const double dc = static_cast<double>(c) - c0;
          const double u = (dr * ct + dc * st) / ra;
          const double v = (-dr * st + dc * ct) / rb;
          if (u * u + v * v <= 1.0) mask[r * side + c] = true;
        }
      }
    }
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) s.image[i] -= kBlobDrop;
    }
  }
  for (double& v : s.image.data()) v = std::clamp(v, 0.0, 1.0);
  return s;
}

// --- splitting --------------------------------------------------------------

SplitIndices split_indices(std::size_t n, const SplitRatios& ratios, std::uint64_t seed) {
  ratios.validate();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  auto rng = make_rng(seed, kStreamSplit);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.train + 0.5));
  const auto n_valid = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.valid + 0.5));
  if (n_train + n_valid > n) throw ConfigError("split ratios leave no room for the test split");
  SplitIndices out;
  out.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.valid.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                   idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  out.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), idx.end());
  return out;
}

Dataset make_dataset(const GeneratorParams& params) {
  params.validate();
  Dataset ds;
  ds.params = params;
  auto normal_rng = make_rng(params.seed, kStreamNormal);
  auto anomaly_rng = make_rng(params.seed, kStreamAnomaly);
  const double noise = params.effective_noise();

  Tensor normals;
  switch (params.kind) {
    case GeneratorKind::half_moon:
      normals = sample_half_moon(params.n, noise, normal_rng);
      ds.dim = 2;
      break;
    case GeneratorKind::imbalanced_modes:
      normals = sample_imbalanced_modes(params.n, params.weight, normal_rng);
      ds.dim = 2;
      break;
    case GeneratorKind::texture: {
      ds.side = params.side;
      ds.dim = params.side * params.side;
      normals = Tensor(Shape{params.n, ds.dim});
      for (std::size_t i = 0; i < params.n; ++i) {
        auto s = sample_texture(params.side, params.period, noise, false, normal_rng);
        std::copy(s.image.data().begin(), s.image.data().end(), normals.row(i).begin());
      }
      break;
    }
  }

  const auto split = split_indices(params.n, params.ratios, params.seed);
  if (split.train.empty() || split.valid.empty() || split.test.empty()) {
    throw ConfigError("every split needs at least one sample; increase data.n");
  }
  ds.train = normals.gather_rows(split.train);
  ds.valid = normals.gather_rows(split.valid);
  ds.test_normal = normals.gather_rows(split.test);

  const std::size_t n_anom = params.anomalies > 0 ? params.anomalies : split.test.size();
  switch (params.kind) {
    case GeneratorKind::half_moon:
      ds.test_anomaly = sample_half_moon_anomalies(n_anom, anomaly_rng);
      break;
    case GeneratorKind::imbalanced_modes:
      ds.test_anomaly = sample_mode_anomalies(n_anom, anomaly_rng);
      break;
    case GeneratorKind::texture:
      ds.test_anomaly = Tensor(Shape{n_anom, ds.dim});
      for (std::size_t i = 0; i < n_anom; ++i) {
        auto s = sample_texture(params.side, params.period, noise, true, anomaly_rng);
        std::copy(s.image.data().begin(), s.image.data().end(), ds.test_anomaly.row(i).begin());
      }
      break;
  }
  return ds;
}

Dataset gen_flipped_half_moon(std::size_t n, double noise, std::uint64_t seed) {
  GeneratorParams p;
  p.kind = GeneratorKind::half_moon;
  p.n = n;
  p.noise = noise;
  p.seed = seed;
  return make_dataset(p);
}

Dataset gen_imbalanced_modes(std::size_t n, double weight, std::uint64_t seed) {
  GeneratorParams p;
  p.kind = GeneratorKind::imbalanced_modes;
  p.n = n;
  p.weight = weight;
  p.seed = seed;
  return make_dataset(p);
}

Dataset gen_texture_anomaly(std::size_t n, std::size_t side, std::uint64_t seed) {
  GeneratorParams p;
  p.kind = GeneratorKind::texture;
  p.n = n;
  p.side = side;
  p.seed = seed;
  return make_dataset(p);
}

// --- files ------------------------------------------------------------------

std::string Dataset::descriptor() const {
  std::ostringstream os;
  os << "generator=" << to_string(params.kind) << '\n'
     << "n=" << params.n << '\n'
     << "noise=" << format_double(params.effective_noise()) << '\n';
  if (params.kind == GeneratorKind::imbalanced_modes) os << "weight=" << format_double(params.weight) << '\n';
  if (params.kind == GeneratorKind::texture) os << "period=" << format_double(params.period) << '\n';
  os << "ratios=" << format_double(params.ratios.train) << ',' << format_double(params.ratios.valid) << ','
     << format_double(params.ratios.test) << '\n'
     << "seed=" << params.seed << '\n'
     << "dim=" << dim << '\n'
     << "side=" << side << '\n'
     << "format=" << (is_image() ? "cdat" : "csv") << '\n'
     << "train=" << train.rows() << '\n'
     << "valid=" << valid.rows() << '\n'
     << "test_normal=" << test_normal.rows() << '\n'
     << "test_anomaly=" << test_anomaly.rows() << '\n';
  return os.str();
}

namespace {

constexpr char kCdatMagic[] = {'C', 'D', 'A', 'T', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(b, 8);
}

std::uint64_t get_u64(std::istream& is, const std::string& path) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw DataError("truncated file '" + path + "'");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_csv(const std::string& path, const Tensor& points) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write '" + path + "'");
  const auto d = points.cols();
  for (std::size_t j = 0; j < d; ++j) os << (j ? "," : "") << 'x' << j;
  os << '\n';
  for (std::size_t i = 0; i < points.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) os << (j ? "," : "") << format_double(points.at(i, j));
    os << '\n';
  }
  if (!os) throw DataError("failed writing '" + path + "'");
}

Tensor read_csv(const std::string& path, std::size_t dim) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line)) throw DataError("empty file '" + path + "'");
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw DataError("bad number '" + cell + "' in '" + path + "'");
      }
      ++cols;
    }
    if (cols != dim) {
      throw DataError("'" + path + "' row " + std::to_string(rows + 1) + " has " + std::to_string(cols) +
                      " columns, expected " + std::to_string(dim));
    }
    ++rows;
  }
  if (rows == 0) throw DataError("no samples in '" + path + "'");
  return Tensor(Shape{rows, dim}, std::move(values));
}

std::map<std::string, std::string> read_descriptor(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open dataset descriptor '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace

void write_cdat(const std::string& path, const Tensor& images, std::size_t side) {
  if (images.cols() != side * side) throw ShapeError("write_cdat: images do not match side");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write '" + path + "'");
  os.write(kCdatMagic, sizeof(kCdatMagic));
  put_u64(os, images.rows());
  put_u64(os, side);
  for (double v : images.data()) put_u64(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw DataError("failed writing '" + path + "'");
}

Tensor read_cdat(const std::string& path, std::size_t& side) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  char magic[sizeof(kCdatMagic)];
  if (!is.read(magic, sizeof(magic)) || !std::equal(std::begin(magic), std::end(magic), kCdatMagic)) {
    throw DataError("'" + path + "' is not a CDAT1 file");
  }
  const auto count = get_u64(is, path);
  side = get_u64(is, path);
  if (count == 0 || side == 0 || side > 4096) throw DataError("bad header in '" + path + "'");
  std::vector<double> values(count * side * side);
  for (double& v : values) v = std::bit_cast<double>(get_u64(is, path));
  return Tensor(Shape{count, side * side}, std::move(values));
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir + "': " + ec.message());
  {
    std::ofstream os(dir + "/dataset.txt", std::ios::trunc);
    if (!os) throw DataError("cannot write '" + dir + "/dataset.txt'");
    os << ds.descriptor();
  }
  const std::pair<const char*, const Tensor*> splits[] = {
      {"train", &ds.train}, {"valid", &ds.valid}, {"test_normal", &ds.test_normal}, {"test_anomaly", &ds.test_anomaly}};
  for (const auto& [name, t] : splits) {
    if (ds.is_image()) {
      write_cdat(dir + "/" + name + ".cdat", *t, ds.side);
    } else {
      write_csv(dir + "/" + name + ".csv", *t);
    }
  }
}

Dataset load_dataset(const std::string& dir) {
  auto kv = read_descriptor(dir + "/dataset.txt");
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError("dataset descriptor lacks '" + key + "'");
    return it->second;
  };
  Dataset ds;
  try {
    ds.params.kind = parse_generator(need("generator"));
    ds.params.n = std::stoull(need("n"));
    ds.params.noise = std::stod(need("noise"));
    ds.params.seed = std::stoull(need("seed"));
    ds.dim = std::stoull(need("dim"));
    ds.side = std::stoull(need("side"));
    if (kv.contains("weight")) ds.params.weight = std::stod(kv["weight"]);
    if (kv.contains("period")) ds.params.period = std::stod(kv["period"]);
    if (ds.side > 0) ds.params.side = ds.side;
  } catch (const ConfigError& e) {
    throw DataError(std::string("bad dataset descriptor: ") + e.what());
  } catch (const std::logic_error& e) {
    throw DataError(std::string("bad dataset descriptor value: ") + e.what());
  }
  const std::string format = need("format");
  Tensor* targets[] = {&ds.train, &ds.valid, &ds.test_normal, &ds.test_anomaly};
  const char* names[] = {"train", "valid", "test_normal", "test_anomaly"};
  for (int i = 0; i < 4; ++i) {
    if (format == "cdat") {
      std::size_t side = 0;
      *targets[i] = read_cdat(dir + "/" + names[i] + ".cdat", side);
      if (side != ds.side) throw DataError("side mismatch in '" + std::string(names[i]) + ".cdat'");
    } else if (format == "csv") {
      *targets[i] = read_csv(dir + "/" + names[i] + ".csv", ds.dim);
    } else {
      throw DataError("unknown dataset format '" + format + "'");
    }
  }
  return ds;
}

}  // namespace conad
