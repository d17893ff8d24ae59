#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cecmmr/mixture.hpp"

namespace cecmmr {

/// How a single number is read off a mixture for RMSE/MAE.
enum class PointPredictor {
  kArgmaxWeight,  // mean of the highest-weight component (ties: lowest index)
  kExpectation,   // sum_i p_i mu_i
};

std::string_view to_string(PointPredictor predictor) noexcept;
PointPredictor parse_point_predictor(std::string_view text);

/// (1/n) sum_j log sum_i p_i N(mu_i, sigma_i)(y_j), via log-sum-exp, in the
/// units of `targets`. Pass already-pruned mixtures for CEC-MMR models.
double mean_log_likelihood(std::span<const MixtureParams> params, std::span<const double> targets);

double point_predict(const MixtureParams& params, PointPredictor predictor);

double rmse(std::span<const double> predictions, std::span<const double> targets);
double mae(std::span<const double> predictions, std::span<const double> targets);

struct SplitMetrics {
  double mean_log_likelihood = 0.0;               // nats, original target units
  double mean_log_likelihood_standardized = 0.0;  // nats, standardized target units
  double rmse = 0.0;                              // original target units
  double mae = 0.0;                               // original target units
  friend bool operator==(const SplitMetrics&, const SplitMetrics&) = default;
};

struct RunMetrics {
  std::size_t split_index = 0;
  std::size_t run_index = 0;
  std::uint64_t seed = 0;
  std::size_t active_k = 0;
  double final_train_loss = 0.0;
  SplitMetrics train;
  SplitMetrics test;
  friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // (n-1)-denominator; 0 for a single run
  friend bool operator==(const MetricSummary&, const MetricSummary&) = default;
};

struct MetricsReport {
  std::string method;   // e.g. "CEC-MMR-20"
  std::string dataset;
  PointPredictor predictor = PointPredictor::kArgmaxWeight;
  std::vector<RunMetrics> runs;
  bool single_run = false;  // std fields are 0 by convention

  MetricSummary train_log_likelihood;
  MetricSummary train_rmse;
  MetricSummary train_mae;
  MetricSummary test_log_likelihood;
  MetricSummary test_rmse;
  MetricSummary test_mae;
  MetricSummary active_k;
  MetricSummary final_train_loss;
};

/// Sample mean and (n-1) standard deviation. Values are summed in sorted
/// order, so the result does not depend on the order of `values`.
MetricSummary summarize(std::span<const double> values);

/// Per-metric mean +- std over runs. Throws on an empty list.
MetricsReport aggregate_runs(std::vector<RunMetrics> runs, std::string method = {},
                             std::string dataset = {},
                             PointPredictor predictor = PointPredictor::kArgmaxWeight);

/// Shifts a standardized-units log-likelihood into original target units.
inline double log_likelihood_to_original(double standardized_ll, double target_std) noexcept {
  return standardized_ll - std::log(target_std);
}

}  // namespace cecmmr
