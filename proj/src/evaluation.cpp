#include "cecmmr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cecmmr/errors.hpp"

namespace cecmmr {

std::string_view to_string(PointPredictor predictor) noexcept {
  return predictor == PointPredictor::kArgmaxWeight ? "argmax_weight" : "expectation";
}

PointPredictor parse_point_predictor(std::string_view text) {
  if (text == "argmax_weight" || text == "argmax") return PointPredictor::kArgmaxWeight;
  if (text == "expectation" || text == "mean") return PointPredictor::kExpectation;
  throw ConfigError("unknown point predictor '" + std::string(text) + "'");
}

double mean_log_likelihood(std::span<const MixtureParams> params, std::span<const double> targets) {
  if (params.empty()) throw DataError(DataError::Reason::kEmpty, "mean_log_likelihood: empty split");
  if (params.size() != targets.size()) {
    throw DimensionError("mean_log_likelihood: mixture/target count mismatch");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < params.size(); ++j) sum += gmm_log_density(params[j], targets[j]);
  return sum / static_cast<double>(params.size());
}

double point_predict(const MixtureParams& params, PointPredictor predictor) {
  if (params.size() == 0) throw DimensionError("point_predict: empty mixture");
  if (predictor == PointPredictor::kArgmaxWeight) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < params.size(); ++i) {
      if (params.weights[i] > params.weights[best]) best = i;
    }
    return params.means[best];
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) sum += params.weights[i] * params.means[i];
  return sum;
}

namespace {
void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw DimensionError(std::string(what) + ": length mismatch");
  if (a.empty()) throw DataError(DataError::Reason::kEmpty, std::string(what) + ": no samples");
}
}  // namespace

double rmse(std::span<const double> predictions, std::span<const double> targets) {
  check_pair(predictions, targets, "rmse");
  double sum = 0.0;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const double d = predictions[j] - targets[j];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(targets.size()));
}

double mae(std::span<const double> predictions, std::span<const double> targets) {
  check_pair(predictions, targets, "mae");
  double sum = 0.0;
  for (std::size_t j = 0; j < targets.size(); ++j) sum += std::abs(predictions[j] - targets[j]);
  return sum / static_cast<double>(targets.size());
}

MetricSummary summarize(std::span<const double> values) {
  if (values.empty()) throw DataError(DataError::Reason::kEmpty, "summarize: no values");
  Vector sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  MetricSummary s;
  s.mean = sum / n;
  if (sorted.size() > 1) {
    Vector sq(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const double d = sorted[i] - s.mean;
      sq[i] = d * d;
    }
    std::sort(sq.begin(), sq.end());
    double ss = 0.0;
    for (double v : sq) ss += v;
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

MetricsReport aggregate_runs(std::vector<RunMetrics> runs, std::string method, std::string dataset,
                             PointPredictor predictor) {
  if (runs.empty()) throw DataError(DataError::Reason::kEmpty, "aggregate_runs: no runs");
  MetricsReport report;
  report.method = std::move(method);
  report.dataset = std::move(dataset);
  report.predictor = predictor;
  report.single_run = runs.size() == 1;

  auto column = [&](auto field) {
    Vector values;
    values.reserve(runs.size());
    for (const auto& r : runs) values.push_back(field(r));
    return summarize(values);
  };
  report.train_log_likelihood = column([](const RunMetrics& r) { return r.train.mean_log_likelihood; });
  report.train_rmse = column([](const RunMetrics& r) { return r.train.rmse; });
  report.train_mae = column([](const RunMetrics& r) { return r.train.mae; });
  report.test_log_likelihood = column([](const RunMetrics& r) { return r.test.mean_log_likelihood; });
  report.test_rmse = column([](const RunMetrics& r) { return r.test.rmse; });
  report.test_mae = column([](const RunMetrics& r) { return r.test.mae; });
  report.active_k = column([](const RunMetrics& r) { return static_cast<double>(r.active_k); });
  report.final_train_loss = column([](const RunMetrics& r) { return r.final_train_loss; });
  report.runs = std::move(runs);
  return report;
}

}  // namespace cecmmr
