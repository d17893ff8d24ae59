#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cecmmr/datasets.hpp"
#include "cecmmr/evaluation.hpp"
#include "cecmmr/model.hpp"
#include "cecmmr/objectives.hpp"
#include "cecmmr/pruning.hpp"

namespace cecmmr {

struct DatasetRef {
  enum class Kind { kTwoCircles, kZigzag, kEllipse, kCsv, kXyz };

  Kind kind = Kind::kEllipse;
  // Generators.
  std::size_t n = 2000;
  std::uint64_t seed = 0;
  TwoCirclesOptions circles;
  ZigzagOptions zigzag;
  EllipseOptions ellipse;
  // Files.
  std::filesystem::path path;
  std::string target_column;
  CsvOptions csv;

  std::string display_name() const;
};

RegressionDataset load_dataset(const DatasetRef& ref);

struct GridRanges {
  std::vector<std::size_t> hidden_layers;
  std::vector<std::size_t> hidden_width;
  std::vector<std::size_t> batch_size;
  std::vector<double> learning_rate;

  static GridRanges uci();
  static GridRanges large();  // Bike Sharing / Song Year ranges
  std::size_t cardinality() const noexcept;
  friend bool operator==(const GridRanges&, const GridRanges&) = default;
};

enum class SelectionMetric { kLogLikelihood, kRmse };

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetRef dataset;
  SplitSpec split{0.8, 1, 1, 0};
  LossConfig loss;
  std::size_t components = 10;
  NetworkConfig network;  // input_dim is taken from the dataset
  SigmaBounds sigma;
  PruningConfig pruning;
  std::optional<bool> prune;  // unset: prune CEC models, leave MDN mixtures intact
  std::size_t epochs = 1024;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;  // explicit init seeds per run; overrides split.num_runs
  PointPredictor predictor = PointPredictor::kArgmaxWeight;
  std::size_t log_every = 1;  // epochs between test-loss / active-count log rows
  std::optional<GridRanges> grid;
  SelectionMetric selection = SelectionMetric::kLogLikelihood;
  double validation_fraction = 0.9;  // share of the training split kept for fitting in grid search

  bool pruning_enabled() const noexcept { return prune.value_or(loss.kind == LossKind::kCec); }
  std::size_t run_count() const noexcept { return seeds.empty() ? split.num_runs : seeds.size(); }
  std::uint64_t init_seed(std::size_t run) const noexcept;
  std::string method_label() const;  // "CEC-MMR-20", "MDN-5"
  void validate() const;
};

/// Everything needed to turn raw inputs into (pruned) mixtures.
struct FittedModel {
  Model model;
  Standardization stats;
  PruningConfig pruning;
  bool prune = true;
  std::vector<std::size_t> active_set;  // components active on the training inputs
  friend bool operator==(const FittedModel&, const FittedModel&) = default;
};

/// Mixtures for inputs already in standardized units, pruned when the model
/// prunes (global active set, then the per-point threshold).
std::vector<MixtureParams> fitted_mixtures(const FittedModel& fitted, const Matrix& inputs);

/// Metrics for a split given in standardized units.
SplitMetrics evaluate_split(const FittedModel& fitted, const RegressionDataset& split,
                            PointPredictor predictor);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> test_loss;
  std::optional<std::size_t> active_components;
};

struct TrainingResult {
  Model model;
  std::vector<EpochLog> log;
  double final_train_loss = 0.0;
};

/// Mini-batch Adam on standardized data. `monitor` (optional) is scored in eval
/// mode for the log. A trailing batch of one sample is merged into the previous one.
TrainingResult train_model(const ExperimentConfig& config, const RegressionDataset& train,
                           const RegressionDataset* monitor, std::uint64_t init_seed,
                           std::uint64_t shuffle_seed);

/// Post-training sweep over the training inputs.
FittedModel finalize_model(const ExperimentConfig& config, Model model,
                           const RegressionDataset& train);

struct RunArtifacts {
  FittedModel fitted;
  TrainingResult training;
  RunMetrics metrics;
  ClusterAssignment train_assignment;
};

/// Trains, prunes and evaluates one (split, run) cell on raw (unstandardized) data.
RunArtifacts run_single(const ExperimentConfig& config, const RegressionDataset& raw,
                        const Split& split, std::size_t split_index, std::size_t run_index);

struct ExperimentResult {
  MetricsReport report;
  std::filesystem::path run_dir;  // empty when artifacts were not written
};

struct RunOptions {
  std::filesystem::path root;  // artifacts go to root/<name>-<hash>; empty disables writing
  bool verbose = false;
};

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

struct GridCell {
  std::size_t index = 0;
  std::size_t hidden_layers = 0;
  std::size_t hidden_width = 0;
  std::size_t batch_size = 0;
  double learning_rate = 0.0;
  bool ok = false;
  std::string error;
  double selection_value = 0.0;  // validation log-likelihood or RMSE
  SplitMetrics validation;
};

struct GridResult {
  ExperimentConfig best;
  std::size_t best_index = 0;
  std::vector<GridCell> cells;
};

/// Exhaustive sweep over config.grid. Each cell trains on a carve-out of the
/// first split's training portion and is scored on the remainder. Failed cells
/// are recorded and skipped. `best` is `config` with the winning hyperparameters
/// and no grid.
GridResult grid_search(const ExperimentConfig& config, bool verbose = false);

struct ComponentBand {
  std::size_t component = 0;
  double weight = 0.0;
  double mean = 0.0;   // original target units
  double sigma = 0.0;  // original target units
};

struct RangePlotRecord {
  double x = 0.0;  // original input units along the plotted axis
  std::vector<ComponentBand> components;
};

/// Slice through a multi-dimensional input space: vary `axis`, hold the other
/// coordinates at `base_point` (original units).
struct RangePlotSlice {
  std::size_t axis = 0;
  Vector base_point;
};

std::vector<RangePlotRecord> emit_range_plot(const FittedModel& fitted,
                                             std::span<const double> x_grid,
                                             const std::optional<RangePlotSlice>& slice = {});

/// Evenly spaced grid of `points` values covering [lo, hi].
Vector linspace(double lo, double hi, std::size_t points);

/// Lower-case hex FNV-1a 64 of the canonical config JSON.
std::string config_hash(const ExperimentConfig& config);

}  // namespace cecmmr
