#include "cecmmr/report_io.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "cecmmr/errors.hpp"

namespace cecmmr {
namespace {

using nlohmann::json;

json summary_json(const MetricSummary& s) { return {{"mean", s.mean}, {"std", s.std}}; }

MetricSummary summary_from(const json& j) {
  return {j.at("mean").get<double>(), j.at("std").get<double>()};
}

json split_json(const SplitMetrics& m) {
  return {{"mean_log_likelihood", m.mean_log_likelihood},
          {"mean_log_likelihood_standardized", m.mean_log_likelihood_standardized},
          {"rmse", m.rmse},
          {"mae", m.mae}};
}

SplitMetrics split_from(const json& j) {
  SplitMetrics m;
  m.mean_log_likelihood = j.at("mean_log_likelihood").get<double>();
  m.mean_log_likelihood_standardized = j.at("mean_log_likelihood_standardized").get<double>();
  m.rmse = j.at("rmse").get<double>();
  m.mae = j.at("mae").get<double>();
  return m;
}

std::string csv_cell(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string pm(const MetricSummary& s, const TableOptions& o, double scale = 1.0) {
  std::array<char, 96> buf{};
  std::snprintf(buf.data(), buf.size(), "%.*f \xC2\xB1 %.*f", o.precision, s.mean * scale,
                o.precision, s.std * std::abs(scale));
  return buf.data();
}

template <typename T>
std::size_t index_of(std::vector<T>& list, const T& value) {
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (list[i] == value) return i;
  }
  list.push_back(value);
  return list.size() - 1;
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

json metrics_to_json(const MetricsReport& r) {
  json runs = json::array();
  for (const auto& run : r.runs) {
    runs.push_back({{"split", run.split_index},
                    {"run", run.run_index},
                    {"seed", run.seed},
                    {"active_k", run.active_k},
                    {"final_train_loss", run.final_train_loss},
                    {"train", split_json(run.train)},
                    {"test", split_json(run.test)}});
  }
  return {{"method", r.method},
          {"dataset", r.dataset},
          {"predictor", std::string(to_string(r.predictor))},
          {"single_run", r.single_run},
          {"summary",
           {{"train",
             {{"mean_log_likelihood", summary_json(r.train_log_likelihood)},
              {"rmse", summary_json(r.train_rmse)},
              {"mae", summary_json(r.train_mae)}}},
            {"test",
             {{"mean_log_likelihood", summary_json(r.test_log_likelihood)},
              {"rmse", summary_json(r.test_rmse)},
              {"mae", summary_json(r.test_mae)}}},
            {"active_k", summary_json(r.active_k)},
            {"final_train_loss", summary_json(r.final_train_loss)}}},
          {"runs", runs}};
}

MetricsReport metrics_from_json(const json& j) {
  try {
    MetricsReport r;
    r.method = j.at("method").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.predictor = parse_point_predictor(j.at("predictor").get<std::string>());
    r.single_run = j.at("single_run").get<bool>();
    const json& s = j.at("summary");
    r.train_log_likelihood = summary_from(s.at("train").at("mean_log_likelihood"));
    r.train_rmse = summary_from(s.at("train").at("rmse"));
    r.train_mae = summary_from(s.at("train").at("mae"));
    r.test_log_likelihood = summary_from(s.at("test").at("mean_log_likelihood"));
    r.test_rmse = summary_from(s.at("test").at("rmse"));
    r.test_mae = summary_from(s.at("test").at("mae"));
    r.active_k = summary_from(s.at("active_k"));
    r.final_train_loss = summary_from(s.at("final_train_loss"));
    for (const auto& run : j.at("runs")) {
      RunMetrics m;
      m.split_index = run.at("split").get<std::size_t>();
      m.run_index = run.at("run").get<std::size_t>();
      m.seed = run.at("seed").get<std::uint64_t>();
      m.active_k = run.at("active_k").get<std::size_t>();
      m.final_train_loss = run.at("final_train_loss").get<double>();
      m.train = split_from(run.at("train"));
      m.test = split_from(run.at("test"));
      r.runs.push_back(m);
    }
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("metrics report: ") + e.what());
  }
}

MetricsReport load_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Reason::kMissingFile, "cannot open '" + path.string() + "'");
  try {
    return metrics_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_metrics_csv(std::ostream& out, const MetricsReport& r) {
  const TableOptions o{false, 6};
  out << "method,dataset,Train/LL,Train/RMSE,Train/MAE,Test/LL,Test/RMSE,Test/MAE,active_k\n";
  out << csv_cell(r.method) << ',' << csv_cell(r.dataset) << ',' << pm(r.train_log_likelihood, o)
      << ',' << pm(r.train_rmse, o) << ',' << pm(r.train_mae, o) << ','
      << pm(r.test_log_likelihood, o) << ',' << pm(r.test_rmse, o) << ',' << pm(r.test_mae, o)
      << ',' << pm(r.active_k, o) << '\n';
}

TableStyle parse_table_style(std::string_view text) {
  if (text == "uci") return TableStyle::kUci;
  if (text == "bike") return TableStyle::kBike;
  if (text == "song") return TableStyle::kSong;
  throw ConfigError("unknown table style '" + std::string(text) + "' (expected uci, bike or song)");
}

void emit_table(std::ostream& out, std::span<const MetricsReport> reports, TableStyle style,
                const TableOptions& options) {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  for (const auto& r : reports) {
    index_of(methods, r.method);
    index_of(datasets, r.dataset);
  }

  if (style == TableStyle::kUci) {
    const double scale = options.scale_by_100 ? 100.0 : 1.0;
    std::vector<std::vector<std::string>> cells(methods.size(),
                                                std::vector<std::string>(datasets.size()));
    for (const auto& r : reports) {
      cells[index_of(methods, r.method)][index_of(datasets, r.dataset)] =
          pm(r.test_log_likelihood, options, scale);
    }
    out << "method";
    for (const auto& d : datasets) out << ',' << csv_cell(d);
    out << '\n';
    for (std::size_t m = 0; m < methods.size(); ++m) {
      out << csv_cell(methods[m]);
      for (const auto& c : cells[m]) out << ',' << c;
      out << '\n';
    }
    return;
  }

  const bool many = datasets.size() > 1;
  out << (many ? "method,dataset," : "method,") << "Train/RMSE,Train/MAE,Test/RMSE,Test/MAE\n";
  for (const auto& r : reports) {
    out << csv_cell(r.method) << ',';
    if (many) out << csv_cell(r.dataset) << ',';
    out << pm(r.train_rmse, options) << ',' << pm(r.train_mae, options) << ','
        << pm(r.test_rmse, options) << ',' << pm(r.test_mae, options) << '\n';
  }
}

void write_training_log_csv(std::ostream& out, std::span<const EpochLog> log) {
  out << "epoch,train_loss,test_loss,active_component_count\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',';
    if (e.test_loss) out << format_double(*e.test_loss);
    out << ',';
    if (e.active_components) out << *e.active_components;
    out << '\n';
  }
}

void write_range_plot_csv(std::ostream& out, std::span<const RangePlotRecord> records) {
  out << "x,component,weight,mean,sigma\n";
  for (const auto& rec : records) {
    for (const auto& c : rec.components) {
      out << format_double(rec.x) << ',' << c.component << ',' << format_double(c.weight) << ','
          << format_double(c.mean) << ',' << format_double(c.sigma) << '\n';
    }
  }
}

json range_plot_to_json(std::span<const RangePlotRecord> records) {
  json rows = json::array();
  for (const auto& rec : records) {
    json comps = json::array();
    for (const auto& c : rec.components) {
      comps.push_back(
          {{"component", c.component}, {"weight", c.weight}, {"mean", c.mean}, {"sigma", c.sigma}});
    }
    rows.push_back({{"x", rec.x}, {"components", comps}});
  }
  return rows;
}

json mixture_to_json(const MixtureParams& p) {
  return {{"weights", p.weights}, {"means", p.means}, {"sigmas", p.sigmas}};
}

MixtureParams mixture_from_json(const json& j) {
  try {
    MixtureParams p;
    p.weights = j.at("weights").get<Vector>();
    p.means = j.at("means").get<Vector>();
    p.sigmas = j.at("sigmas").get<Vector>();
    if (p.means.size() != p.size() || p.sigmas.size() != p.size()) {
      throw DimensionError("mixture: weights, means and sigmas differ in length");
    }
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("mixture: ") + e.what());
  }
}

}  // namespace cecmmr
