#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "conad/tensor.hpp"

namespace conad {

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;

  void validate() const;
};

enum class GeneratorKind { half_moon, imbalanced_modes, texture };

GeneratorKind parse_generator(const std::string& s);
std::string to_string(GeneratorKind k);

struct GeneratorParams {
  GeneratorKind kind = GeneratorKind::imbalanced_modes;
  std::size_t n = 2000;       // normal samples before splitting
  double noise = -1.0;        // < 0: generator default
  double weight = 0.9;        // dominant-mode share (imbalanced_modes)
  std::size_t side = 16;      // image side (texture)
  double period = 8.0;        // grating period in pixels (texture)
  std::size_t anomalies = 0;  // 0: as many as normal test samples
  SplitRatios ratios;
  std::uint64_t seed = 0;

  double effective_noise() const;
  void validate() const;
};

// Train and valid hold normal samples only; anomalies live in test_anomaly.
struct Dataset {
  GeneratorParams params;
  std::size_t dim = 0;
  std::size_t side = 0;  // > 0 for square images
  Tensor train;
  Tensor valid;
  Tensor test_normal;
  Tensor test_anomaly;

  bool is_image() const { return side > 0; }
  std::string descriptor() const;
};

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream);

// --- flipped half moon ------------------------------------------------------
// Upper arc: unit circle for x in [-1, 0.5] (y > 0). Lower arc: its
// reflection through y = 0 for x in [0, 1]. On x in (0, 0.5) both branches
// exist, so y|x is one-to-many with jumps at x = 0 and x = 0.5.
Tensor sample_half_moon(std::size_t n, double noise, std::mt19937_64& rng);
double half_moon_distance(double x, double y);

// --- imbalanced modes -------------------------------------------------------
inline constexpr double kModeCenter = 2.0;
inline constexpr double kModeSigma = 0.3;
Tensor sample_imbalanced_modes(std::size_t n, double weight, std::mt19937_64& rng);
// Uniform on [-4, 4]^2 outside radius-1 balls around both mode centers.
Tensor sample_mode_anomalies(std::size_t n, std::mt19937_64& rng);

// --- texture ----------------------------------------------------------------
inline constexpr double kGratingMean = 0.65;
inline constexpr double kGratingAmplitude = 0.3;
inline constexpr double kBlobDrop = 0.5;

// Horizontal stripes: value depends on the row only. Shape (side * side).
Tensor render_grating(std::size_t side, double period, double phase);

struct TextureSample {
  Tensor clean;  // analytic grating
  Tensor image;  // observed image, clamped to [0, 1]
};
TextureSample sample_texture(std::size_t side, double period, double noise, bool anomalous,
                             std::mt19937_64& rng);

// --- splitting --------------------------------------------------------------
struct SplitIndices {
  std::vector<std::size_t> train, valid, test;
};
SplitIndices split_indices(std::size_t n, const SplitRatios& ratios, std::uint64_t seed);

// Generates normal samples, splits them and appends the anomaly test set.
Dataset make_dataset(const GeneratorParams& params);

Dataset gen_flipped_half_moon(std::size_t n, double noise, std::uint64_t seed);
Dataset gen_imbalanced_modes(std::size_t n, double weight, std::uint64_t seed);
Dataset gen_texture_anomaly(std::size_t n, std::size_t side, std::uint64_t seed);

// --- files ------------------------------------------------------------------
// A dataset directory holds dataset.txt (descriptor) and one file per split:
// <split>.csv for point data, <split>.cdat for images ("CDAT1", u64 count,
// u64 side, row-major little-endian doubles).
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

void write_cdat(const std::string& path, const Tensor& images, std::size_t side);
Tensor read_cdat(const std::string& path, std::size_t& side);

}  // namespace conad
