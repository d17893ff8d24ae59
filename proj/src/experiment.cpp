#include "cecmmr/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>

#include "cecmmr/checkpoint.hpp"
#include "cecmmr/config_io.hpp"
#include "cecmmr/errors.hpp"
#include "cecmmr/report_io.hpp"

namespace cecmmr {
namespace {

std::vector<std::pair<std::size_t, std::size_t>> batch_bounds(std::size_t n, std::size_t batch,
                                                              bool need_pairs) {
  std::vector<std::pair<std::size_t, std::size_t>> bounds;
  for (std::size_t start = 0; start < n; start += batch) {
    bounds.emplace_back(start, std::min(n, start + batch));
  }
  if (need_pairs && bounds.size() > 1 && bounds.back().second - bounds.back().first < 2) {
    const std::size_t end = bounds.back().second;
    bounds.pop_back();
    bounds.back().second = end;
  }
  return bounds;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Reason::kMissingFile, "cannot write '" + path.string() + "'");
  out << text;
}

double eval_objective(const Model& model, const LossConfig& loss, const RegressionDataset& data) {
  const auto params = predict(model, data.inputs);
  return compute_loss({loss.kind, LossDomain::kLog}, params, data.targets).value;
}

}  // namespace

std::string DatasetRef::display_name() const {
  switch (kind) {
    case Kind::kTwoCircles:
      return "two_circles";
    case Kind::kZigzag:
      return "zigzag";
    case Kind::kEllipse:
      return "ellipse";
    case Kind::kCsv:
    case Kind::kXyz:
      return path.stem().string();
  }
  return "dataset";
}

RegressionDataset load_dataset(const DatasetRef& ref) {
  switch (ref.kind) {
    case DatasetRef::Kind::kTwoCircles:
      return gen_two_circles(ref.n, ref.circles, ref.seed);
    case DatasetRef::Kind::kZigzag:
      return gen_zigzag(ref.n, ref.zigzag, ref.seed);
    case DatasetRef::Kind::kEllipse:
      return gen_ellipse(ref.n, ref.ellipse, ref.seed);
    case DatasetRef::Kind::kCsv:
      return load_csv(ref.path, ref.target_column, ref.csv);
    case DatasetRef::Kind::kXyz:
      return load_xyz_pointcloud(ref.path);
  }
  throw ConfigError("unknown dataset kind");
}

GridRanges GridRanges::uci() { return {{1, 2, 3}, {16, 32, 64}, {16, 32, 64}, {1e-2, 1e-3, 1e-4, 1e-5}}; }

GridRanges GridRanges::large() {
  return {{1, 2, 3}, {32, 64, 128}, {64, 128, 256}, {1e-2, 1e-3, 1e-4, 1e-5}};
}

std::size_t GridRanges::cardinality() const noexcept {
  return hidden_layers.size() * hidden_width.size() * batch_size.size() * learning_rate.size();
}

std::uint64_t ExperimentConfig::init_seed(std::size_t run) const noexcept {
  if (!seeds.empty()) return seeds[run];
  return derive_seed(seed, run);
}

std::string ExperimentConfig::method_label() const {
  std::string label = loss.kind == LossKind::kCec ? "CEC-MMR-" : "MDN-";
  label += std::to_string(components);
  if (loss.domain == LossDomain::kLiteral) label += "-literal";
  return label;
}

void ExperimentConfig::validate() const {
  if (components == 0) throw ConfigError("experiment: components must be positive");
  if (batch_size == 0) throw ConfigError("experiment: batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("experiment: learning_rate must be positive and finite");
  }
  if (log_every == 0) throw ConfigError("experiment: log_every must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("experiment: validation_fraction must lie in (0, 1)");
  }
  NetworkConfig shape = network;
  shape.input_dim = 1;  // the real input width comes from the dataset
  shape.validate();
  split.validate();
  sigma.validate();
  pruning.validate();
  if (grid && grid->cardinality() == 0) throw ConfigError("experiment: grid has an empty range");
}

std::vector<MixtureParams> fitted_mixtures(const FittedModel& fitted, const Matrix& inputs) {
  auto params = predict(fitted.model, inputs);
  if (!fitted.prune) return params;
  const ClusterAssignment assignment = prune_assign(params, fitted.pruning, fitted.active_set);
  return apply_assignment(params, assignment);
}

SplitMetrics evaluate_split(const FittedModel& fitted, const RegressionDataset& split,
                            PointPredictor predictor) {
  const auto mixtures = fitted_mixtures(fitted, split.inputs);
  SplitMetrics m;
  m.mean_log_likelihood_standardized = mean_log_likelihood(mixtures, split.targets);
  m.mean_log_likelihood =
      log_likelihood_to_original(m.mean_log_likelihood_standardized, fitted.stats.target_std);
  Vector predictions(split.size());
  Vector targets(split.size());
  for (std::size_t j = 0; j < split.size(); ++j) {
    predictions[j] = fitted.stats.target_to_original(point_predict(mixtures[j], predictor));
    targets[j] = fitted.stats.target_to_original(split.targets[j]);
  }
  m.rmse = rmse(predictions, targets);
  m.mae = mae(predictions, targets);
  return m;
}

TrainingResult train_model(const ExperimentConfig& config, const RegressionDataset& train,
                           const RegressionDataset* monitor, std::uint64_t init_seed,
                           std::uint64_t shuffle_seed) {
  config.validate();
  if (train.size() == 0) throw DataError(DataError::Reason::kEmpty, "train_model: empty training set");
  NetworkConfig net = config.network;
  net.input_dim = train.dims();
  net.seed = init_seed;
  const bool need_pairs = net.batchnorm_enabled;
  if (need_pairs && train.size() < 2) {
    throw ConfigError("train_model: batch norm needs at least 2 training samples");
  }

  TrainingResult result;
  result.model = init_model(net, config.components, config.sigma);
  Model& model = result.model;
  Rng rng(shuffle_seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bounds = batch_bounds(train.size(), config.batch_size, need_pairs);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double weighted = 0.0;
    for (std::size_t b = 0; b < bounds.size(); ++b) {
      const auto [lo, hi] = bounds[b];
      std::span<const std::size_t> idx(order.data() + lo, hi - lo);
      const Matrix x = gather_rows(train.inputs, idx);
      const Vector y = gather(train.targets, idx);
      const ModelForward fw = forward(model, x, Mode::kTrain, rng);
      const BatchLoss loss = compute_loss(config.loss, fw.params, y);
      if (!std::isfinite(loss.value)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(b) + " (lr " + std::to_string(config.learning_rate) +
                            ")");
      }
      const ModelGradients grads = loss_backward(loss, fw.params, y, model, fw.trace);
      adam_step(model, grads, config.learning_rate);
      weighted += loss.value * static_cast<double>(hi - lo);
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = weighted / static_cast<double>(train.size());
    if (epoch % config.log_every == 0 || epoch == config.epochs) {
      if (monitor != nullptr && monitor->size() > 0) {
        entry.test_loss = compute_loss(config.loss, predict(model, monitor->inputs), monitor->targets).value;
      }
      entry.active_components =
          prune_assign(predict(model, train.inputs), config.pruning).active_set.size();
    }
    result.log.push_back(entry);
  }
  result.final_train_loss = eval_objective(model, config.loss, train);
  if (!std::isfinite(result.final_train_loss)) {
    throw TrainingError("non-finite training loss after " + std::to_string(config.epochs) +
                        " epochs");
  }
  return result;
}

FittedModel finalize_model(const ExperimentConfig& config, Model model,
                           const RegressionDataset& train) {
  FittedModel fitted;
  fitted.stats = train.stats;
  fitted.pruning = config.pruning;
  fitted.prune = config.pruning_enabled();
  const auto params = predict(model, train.inputs);
  fitted.active_set = prune_assign(params, config.pruning).active_set;
  fitted.model = std::move(model);
  return fitted;
}

RunArtifacts run_single(const ExperimentConfig& config, const RegressionDataset& raw,
                        const Split& split, std::size_t split_index, std::size_t run_index) {
  const RegressionDataset standardized = standardize(raw, split.train);
  const RegressionDataset train = standardized.subset(split.train);
  const RegressionDataset test = standardized.subset(split.test);
  const std::uint64_t init_seed = config.init_seed(run_index);
  const std::uint64_t shuffle_seed =
      derive_seed(derive_seed(config.seed ^ 0x5348554646ULL, split_index), run_index);

  RunArtifacts out;
  out.training = train_model(config, train, &test, init_seed, shuffle_seed);
  out.fitted = finalize_model(config, out.training.model, train);
  const auto train_params = predict(out.fitted.model, train.inputs);
  out.train_assignment = prune_assign(train_params, config.pruning, out.fitted.active_set);

  RunMetrics& m = out.metrics;
  m.split_index = split_index;
  m.run_index = run_index;
  m.seed = init_seed;
  m.active_k = out.fitted.active_set.size();
  m.final_train_loss = out.training.final_train_loss;
  m.train = evaluate_split(out.fitted, train, config.predictor);
  m.test = evaluate_split(out.fitted, test, config.predictor);
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const RegressionDataset raw = load_dataset(config.dataset);
  const auto splits = make_splits(raw.size(), config.split);

  ExperimentResult result;
  if (!options.root.empty()) {
    result.run_dir = options.root / (config.name + "-" + config_hash(config));
    std::filesystem::create_directories(result.run_dir);
    write_text(result.run_dir / "config.json", config_to_json(config).dump(2) + "\n");
  }

  std::vector<RunMetrics> runs;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    for (std::size_t r = 0; r < config.run_count(); ++r) {
      RunArtifacts run = run_single(config, raw, splits[s], s, r);
      if (options.verbose) {
        std::cerr << config.method_label() << " split " << s << " run " << r
                  << ": test ll " << run.metrics.test.mean_log_likelihood << ", active_k "
                  << run.metrics.active_k << "\n";
      }
      if (!result.run_dir.empty()) {
        const auto dir =
            result.run_dir / ("split" + std::to_string(s) + "_run" + std::to_string(r));
        std::filesystem::create_directories(dir);
        save_checkpoint(dir / "checkpoint.bin", run.fitted);
        {
          std::ofstream log(dir / "train_log.csv", std::ios::binary);
          write_training_log_csv(log, run.training.log);
        }
        const RegressionDataset standardized = standardize(raw, splits[s].train);
        const RegressionDataset train = standardized.subset(splits[s].train);
        {
          std::ofstream csv(dir / "assignment.csv", std::ios::binary);
          write_assignment_csv(csv, run.train_assignment, predict(run.fitted.model, train.inputs),
                               train.targets);
        }
        {
          // Extension: assignments of held-out points under the training active set.
          const RegressionDataset test = standardized.subset(splits[s].test);
          const auto params = predict(run.fitted.model, test.inputs);
          const auto assignment = prune_assign(params, config.pruning, run.fitted.active_set);
          std::ofstream csv(dir / "test_assignment.csv", std::ios::binary);
          write_assignment_csv(csv, assignment, params, test.targets);
        }
        if (raw.dims() == 1) {
          double lo = std::numeric_limits<double>::infinity();
          double hi = -lo;
          for (double v : raw.inputs.flat()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
          }
          const auto records = emit_range_plot(run.fitted, linspace(lo, hi, 200));
          std::ofstream csv(dir / "range_plot.csv", std::ios::binary);
          write_range_plot_csv(csv, records);
        }
      }
      runs.push_back(run.metrics);
    }
  }
  result.report = aggregate_runs(std::move(runs), config.method_label(),
                                 config.dataset.display_name(), config.predictor);
  if (!result.run_dir.empty()) {
    write_text(result.run_dir / "metrics.json", metrics_to_json(result.report).dump(2) + "\n");
    std::ofstream csv(result.run_dir / "metrics.csv", std::ios::binary);
    write_metrics_csv(csv, result.report);
  }
  return result;
}

GridResult grid_search(const ExperimentConfig& config, bool verbose) {
  config.validate();
  if (!config.grid) throw ConfigError("grid_search: config has no grid");
  const GridRanges& g = *config.grid;

  const RegressionDataset raw = load_dataset(config.dataset);
  const auto splits = make_splits(raw.size(), config.split);
  std::vector<std::size_t> train_idx = splits.front().train;
  Rng carve(derive_seed(config.split.seed, 0x9a11dULL));
  std::shuffle(train_idx.begin(), train_idx.end(), carve);
  const auto fit_size = static_cast<std::size_t>(
      std::llround(config.validation_fraction * static_cast<double>(train_idx.size())));
  if (fit_size == 0 || fit_size >= train_idx.size()) {
    throw ConfigError("grid_search: validation carve-out leaves one side empty");
  }
  std::vector<std::size_t> fit(train_idx.begin(), train_idx.begin() + static_cast<std::ptrdiff_t>(fit_size));
  std::vector<std::size_t> val(train_idx.begin() + static_cast<std::ptrdiff_t>(fit_size), train_idx.end());
  std::sort(fit.begin(), fit.end());
  std::sort(val.begin(), val.end());
  const RegressionDataset standardized = standardize(raw, fit);
  const RegressionDataset fit_set = standardized.subset(fit);
  const RegressionDataset val_set = standardized.subset(val);

  GridResult result;
  bool have_best = false;
  std::size_t index = 0;
  for (std::size_t layers : g.hidden_layers) {
    for (std::size_t width : g.hidden_width) {
      for (std::size_t batch : g.batch_size) {
        for (double lr : g.learning_rate) {
          GridCell cell;
          cell.index = index++;
          cell.hidden_layers = layers;
          cell.hidden_width = width;
          cell.batch_size = batch;
          cell.learning_rate = lr;
          ExperimentConfig cfg = config;
          cfg.grid.reset();
          cfg.network.hidden_layers = layers;
          cfg.network.hidden_width = width;
          cfg.batch_size = batch;
          cfg.learning_rate = lr;
          try {
            const TrainingResult trained =
                train_model(cfg, fit_set, nullptr, cfg.init_seed(0), derive_seed(cfg.seed, cell.index));
            const FittedModel fitted = finalize_model(cfg, trained.model, fit_set);
            cell.validation = evaluate_split(fitted, val_set, cfg.predictor);
            cell.selection_value = config.selection == SelectionMetric::kLogLikelihood
                                       ? cell.validation.mean_log_likelihood
                                       : cell.validation.rmse;
            if (!std::isfinite(cell.selection_value)) {
              throw TrainingError("non-finite validation metric");
            }
            cell.ok = true;
          } catch (const Error& e) {
            cell.ok = false;
            cell.error = std::string(e.kind()) + ": " + e.what();
          }
          if (verbose) {
            std::cerr << "grid cell " << cell.index << " (layers " << layers << ", width " << width
                      << ", batch " << batch << ", lr " << lr << "): "
                      << (cell.ok ? std::to_string(cell.selection_value) : cell.error) << "\n";
          }
          if (cell.ok) {
            const GridCell* best = have_best ? &result.cells[result.best_index] : nullptr;
            const bool better =
                best == nullptr ||
                (config.selection == SelectionMetric::kLogLikelihood
                     ? cell.selection_value > best->selection_value
                     : cell.selection_value < best->selection_value);
            if (better) {
              result.best_index = cell.index;
              result.best = cfg;
              have_best = true;
            }
          }
          result.cells.push_back(std::move(cell));
        }
      }
    }
  }
  if (!have_best) throw TrainingError("grid_search: every cell failed");
  return result;
}

Vector linspace(double lo, double hi, std::size_t points) {
  Vector out(points);
  if (points == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < points; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return out;
}

std::vector<RangePlotRecord> emit_range_plot(const FittedModel& fitted,
                                             std::span<const double> x_grid,
                                             const std::optional<RangePlotSlice>& slice) {
  const std::size_t d = fitted.model.input_dim();
  if (d != 1 && !slice) {
    throw ConfigError("emit_range_plot: input has " + std::to_string(d) +
                      " dimensions; declare a slice (axis + base point)");
  }
  if (slice && (slice->axis >= d || slice->base_point.size() != d)) {
    throw ConfigError("emit_range_plot: slice does not match the input dimension");
  }
  Matrix inputs(x_grid.size(), d);
  for (std::size_t g = 0; g < x_grid.size(); ++g) {
    Vector raw = slice ? slice->base_point : Vector(1, 0.0);
    raw[slice ? slice->axis : 0] = x_grid[g];
    const Vector z = fitted.stats.features_to_standardized(raw);
    std::copy(z.begin(), z.end(), inputs.row(g).begin());
  }
  const auto mixtures = fitted_mixtures(fitted, inputs);
  std::vector<RangePlotRecord> records;
  records.reserve(x_grid.size());
  for (std::size_t g = 0; g < x_grid.size(); ++g) {
    RangePlotRecord rec;
    rec.x = x_grid[g];
    const MixtureParams& p = mixtures[g];
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p.weights[i] <= 0.0) continue;
      rec.components.push_back({i, p.weights[i], fitted.stats.target_to_original(p.means[i]),
                                p.sigmas[i] * fitted.stats.target_std});
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = config_to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace cecmmr
