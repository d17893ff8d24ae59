#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cecmmr/evaluation.hpp"
#include "cecmmr/experiment.hpp"
#include "cecmmr/mixture.hpp"

namespace cecmmr {

nlohmann::json metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& json);
MetricsReport load_metrics(const std::filesystem::path& path);

/// One-row CSV of a report: method, dataset, then train/test LL, RMSE, MAE
/// cells as "mean ± std", then active_k.
void write_metrics_csv(std::ostream& out, const MetricsReport& report);

enum class TableStyle {
  kUci,   // method rows, one column per dataset, mean test log-likelihood cells
  kBike,  // method rows, Train/RMSE, Train/MAE, Test/RMSE, Test/MAE
  kSong,  // same columns as kBike
};

TableStyle parse_table_style(std::string_view text);

struct TableOptions {
  bool scale_by_100 = false;  // display scaling used by the log-likelihood table
  int precision = 2;
};

/// Rows appear in first-seen method order, dataset columns in first-seen order.
void emit_table(std::ostream& out, std::span<const MetricsReport> reports, TableStyle style,
                const TableOptions& options = {});

/// epoch,train_loss,test_loss,active_component_count. Missing cells stay empty.
void write_training_log_csv(std::ostream& out, std::span<const EpochLog> log);

/// Long format: x,component,weight,mean,sigma, one row per active component.
void write_range_plot_csv(std::ostream& out, std::span<const RangePlotRecord> records);
nlohmann::json range_plot_to_json(std::span<const RangePlotRecord> records);

/// {weights, means, sigmas}
nlohmann::json mixture_to_json(const MixtureParams& params);
MixtureParams mixture_from_json(const nlohmann::json& json);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

}  // namespace cecmmr
