#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cecmmr/matrix.hpp"

namespace cecmmr {

/// z-score parameters. Identity by default.
struct Standardization {
  Vector feature_means;
  Vector feature_stds;  // strictly positive
  double target_mean = 0.0;
  double target_std = 1.0;

  double target_to_original(double standardized) const noexcept {
    return standardized * target_std + target_mean;
  }
  double target_to_standardized(double original) const noexcept {
    return (original - target_mean) / target_std;
  }
  /// Standardizes one raw input row.
  Vector features_to_standardized(std::span<const double> raw) const;
  friend bool operator==(const Standardization&, const Standardization&) = default;
};

struct RegressionDataset {
  std::string name;
  Matrix inputs;  // n x d
  Vector targets;
  std::vector<std::string> feature_names;
  std::string target_name = "y";
  Standardization stats;  // how `inputs`/`targets` relate to original units

  std::size_t size() const noexcept { return targets.size(); }
  std::size_t dims() const noexcept { return inputs.cols(); }
  /// Rows `indices` as a new dataset with the same stats.
  RegressionDataset subset(std::span<const std::size_t> indices) const;
};

struct TwoCirclesOptions {
  std::pair<double, double> radii{1.0, 2.0};
  double noise_std = 0.05;
};

struct ZigzagOptions {
  std::size_t periods = 3;
  double amplitude = 1.0;
  double noise_std = 0.05;
};

struct EllipseOptions {
  std::pair<double, double> semi_axes{2.0, 1.0};  // (input axis a, target axis b)
  double noise_std = 0.05;
};

/// Points on two concentric circles; input x = r cos t, target y = r sin t + noise.
RegressionDataset gen_two_circles(std::size_t n, const TwoCirclesOptions& options,
                                  std::uint64_t seed);

/// x ~ U[0, 1], y = amplitude * triangle(periods * x) + noise, peaks (+amplitude) at x = m / periods.
RegressionDataset gen_zigzag(std::size_t n, const ZigzagOptions& options, std::uint64_t seed);

/// Noise-free zigzag target at x.
double zigzag_value(double x, std::size_t periods, double amplitude);

/// input = a cos t, target = b sin t + noise.
RegressionDataset gen_ellipse(std::size_t n, const EllipseOptions& options, std::uint64_t seed);

struct CsvOptions {
  char delimiter = ',';
  bool drop_constant_columns = true;
  /// Deterministic subsample of rows (0 keeps everything).
  std::size_t max_rows = 0;
  std::uint64_t subsample_seed = 0;
};

/// Header row + numeric cells. Constant feature columns are dropped.
RegressionDataset load_csv(const std::filesystem::path& path, const std::string& target_column,
                           const CsvOptions& options = {});

/// One x y z triple per line (whitespace or comma separated); z is the target.
RegressionDataset load_xyz_pointcloud(const std::filesystem::path& path);

/// Writes inputs (first two coordinates) and targets back as triples with full precision.
void write_xyz_pointcloud(const std::filesystem::path& path, const RegressionDataset& dataset);

/// z-scores features and target using statistics of `train_indices` only
/// (population standard deviation). Throws DataError if the training target is
/// constant. A feature constant on the training rows gets std 1.
RegressionDataset standardize(const RegressionDataset& dataset,
                              std::span<const std::size_t> train_indices);

/// Maps a raw (identity-stats) dataset into the units described by `stats`.
RegressionDataset apply_standardization(const RegressionDataset& raw, const Standardization& stats);

struct SplitSpec {
  double train_fraction = 0.8;
  std::size_t num_splits = 5;
  std::size_t num_runs = 20;
  std::uint64_t seed = 0;

  static SplitSpec uci() { return {0.8, 5, 20, 0}; }
  static SplitSpec bike() { return {0.9, 20, 5, 0}; }
  static SplitSpec song() { return {0.8, 5, 5, 0}; }
  static SplitSpec preset(const std::string& name);

  void validate() const;
  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

struct Split {
  std::vector<std::size_t> train;  // sorted
  std::vector<std::size_t> test;   // sorted
};

/// `num_splits` seeded random partitions of [0, n).
std::vector<Split> make_splits(std::size_t n, const SplitSpec& spec);

/// Independent 64-bit stream seed from a base seed and a tag (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) noexcept;

}  // namespace cecmmr
