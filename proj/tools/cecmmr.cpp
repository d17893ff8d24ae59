// cecmmr: train / grid / eval / plotdata / table front end.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cecmmr/checkpoint.hpp"
#include "cecmmr/config_io.hpp"
#include "cecmmr/errors.hpp"
#include "cecmmr/experiment.hpp"
#include "cecmmr/report_io.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::string config;
  cecmmr::ConfigOverrides overrides;
  std::string run_root;
  bool verbose = false;
};

void add_overrides(CLI::App* cmd, Common& c) {
  cmd->add_option("--config,-c", c.config, "Experiment config (.json or .toml)")->required();
  cmd->add_option("--loss", c.overrides.loss, "Objective: cec or gmm");
  cmd->add_option("--k", c.overrides.components, "Number of mixture components");
  cmd->add_option("--epsilon", c.overrides.epsilon, "Pruning threshold");
  cmd->add_option("--seed", c.overrides.seed, "Base seed");
  cmd->add_option("--epochs", c.overrides.epochs, "Training epochs");
  cmd->add_flag("--literal-loss", c.overrides.literal_loss,
                "Minimize raw densities instead of log terms");
  cmd->add_flag("--verbose,-v", c.verbose, "Progress on stderr");
}

cecmmr::ExperimentConfig load(const Common& c) {
  auto config = cecmmr::load_config(c.config);
  cecmmr::apply_overrides(config, c.overrides);
  return config;
}

fs::path run_root(const Common& c) {
  if (!c.run_root.empty()) return c.run_root;
  if (const char* env = std::getenv("CECMMR_RUN_ROOT"); env != nullptr && *env != '\0') return env;
  return "runs";
}

json summary(const cecmmr::ExperimentResult& r) {
  json out = cecmmr::metrics_to_json(r.report);
  out.erase("runs");
  out["run_dir"] = r.run_dir.generic_string();
  return out;
}

int cmd_train(const Common& c) {
  const auto config = load(c);
  const auto result = cecmmr::run_experiment(config, {run_root(c), c.verbose});
  std::cout << summary(result).dump(2) << "\n";
  return 0;
}

int cmd_grid(const Common& c) {
  auto config = load(c);
  if (!config.grid) config.grid = cecmmr::GridRanges::uci();
  const auto grid = cecmmr::grid_search(config, c.verbose);

  json cells = json::array();
  for (const auto& cell : grid.cells) {
    json row = {{"index", cell.index},
                {"hidden_layers", cell.hidden_layers},
                {"hidden_width", cell.hidden_width},
                {"batch_size", cell.batch_size},
                {"learning_rate", cell.learning_rate},
                {"ok", cell.ok}};
    if (cell.ok) {
      row["selection_value"] = cell.selection_value;
      row["validation"] = {{"mean_log_likelihood", cell.validation.mean_log_likelihood},
                           {"rmse", cell.validation.rmse},
                           {"mae", cell.validation.mae}};
    } else {
      row["error"] = cell.error;
    }
    cells.push_back(std::move(row));
  }
  const auto result = cecmmr::run_experiment(grid.best, {run_root(c), c.verbose});
  if (!result.run_dir.empty()) {
    std::ofstream out(result.run_dir / "grid.json", std::ios::binary);
    out << json({{"best_index", grid.best_index}, {"cells", cells}}).dump(2) << "\n";
  }
  json out = summary(result);
  out["grid"] = {{"best_index", grid.best_index},
                 {"cells", grid.cells.size()},
                 {"best", cecmmr::config_to_json(grid.best)}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::size_t split = 0;
  std::string subset = "test";
};

int cmd_eval(const Common& c, const EvalArgs& a) {
  const auto config = load(c);
  const auto fitted = cecmmr::load_checkpoint(a.checkpoint);
  const auto raw = cecmmr::load_dataset(config.dataset);
  const auto splits = cecmmr::make_splits(raw.size(), config.split);
  if (a.split >= splits.size()) {
    throw cecmmr::ConfigError("eval: split " + std::to_string(a.split) + " does not exist (config has " +
                              std::to_string(splits.size()) + ")");
  }
  const auto scaled = cecmmr::apply_standardization(raw, fitted.stats);
  cecmmr::RegressionDataset part;
  if (a.subset == "all") {
    part = scaled;
  } else if (a.subset == "train" || a.subset == "test") {
    part = scaled.subset(a.subset == "train" ? splits[a.split].train : splits[a.split].test);
  } else {
    throw cecmmr::ConfigError("eval: --subset must be train, test or all");
  }
  const auto m = cecmmr::evaluate_split(fitted, part, config.predictor);
  const json out = {{"subset", a.subset},
                    {"split", a.split},
                    {"points", part.size()},
                    {"active_k", fitted.active_set.size()},
                    {"mean_log_likelihood", m.mean_log_likelihood},
                    {"mean_log_likelihood_standardized", m.mean_log_likelihood_standardized},
                    {"rmse", m.rmse},
                    {"mae", m.mae}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct PlotArgs {
  std::string checkpoint;
  std::optional<double> x_min;
  std::optional<double> x_max;
  std::size_t points = 200;
  std::optional<std::size_t> axis;
  std::vector<double> base_point;
  std::string format = "csv";
  std::string output;
};

int cmd_plotdata(const Common& c, const PlotArgs& a) {
  const auto config = load(c);
  const auto fitted = cecmmr::load_checkpoint(a.checkpoint);
  std::optional<cecmmr::RangePlotSlice> slice;
  if (a.axis) slice = cecmmr::RangePlotSlice{*a.axis, a.base_point};
  const std::size_t axis = a.axis.value_or(0);

  double lo = 0.0;
  double hi = 0.0;
  if (a.x_min && a.x_max) {
    lo = *a.x_min;
    hi = *a.x_max;
  } else {
    const auto raw = cecmmr::load_dataset(config.dataset);
    if (axis >= raw.dims()) throw cecmmr::ConfigError("plotdata: axis out of range");
    lo = hi = raw.inputs(0, axis);
    for (std::size_t j = 0; j < raw.size(); ++j) {
      lo = std::min(lo, raw.inputs(j, axis));
      hi = std::max(hi, raw.inputs(j, axis));
    }
    lo = a.x_min.value_or(lo);
    hi = a.x_max.value_or(hi);
  }
  const auto records = cecmmr::emit_range_plot(fitted, cecmmr::linspace(lo, hi, a.points), slice);

  std::ostringstream text;
  if (a.format == "json") {
    text << cecmmr::range_plot_to_json(records).dump(2) << "\n";
  } else if (a.format == "csv") {
    cecmmr::write_range_plot_csv(text, records);
  } else {
    throw cecmmr::ConfigError("plotdata: --format must be csv or json");
  }
  if (a.output.empty()) {
    std::cout << text.str();
  } else {
    std::ofstream out(a.output, std::ios::binary);
    if (!out) throw cecmmr::DataError(cecmmr::DataError::Reason::kMissingFile, "cannot write '" + a.output + "'");
    out << text.str();
  }
  return 0;
}

struct TableArgs {
  std::vector<std::string> metrics;
  std::string style = "uci";
  bool scale = false;
  int precision = 2;
};

int cmd_table(const TableArgs& a) {
  std::vector<cecmmr::MetricsReport> reports;
  for (const auto& path : a.metrics) {
    fs::path p(path);
    if (fs::is_directory(p)) p /= "metrics.json";
    reports.push_back(cecmmr::load_metrics(p));
  }
  cecmmr::emit_table(std::cout, reports, cecmmr::parse_table_style(a.style), {a.scale, a.precision});
  return 0;
}

int fail(const std::string& kind, const std::string& message, json extra = json::object()) {
  json err = {{"error", kind}, {"message", message}};
  err.update(extra);
  std::cerr << err.dump() << "\n";
  return kind == "usage_error" ? kExitUsage : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture density networks with cross-entropy clustering model reduction"};
  app.require_subcommand(1);

  Common common;
  EvalArgs eval;
  PlotArgs plot;
  TableArgs table;

  auto* train = app.add_subcommand("train", "Train, prune and evaluate every (split, run) cell");
  add_overrides(train, common);
  train->add_option("--run-root", common.run_root, "Artifact root (default: $CECMMR_RUN_ROOT or ./runs)");

  auto* grid = app.add_subcommand("grid", "Grid search, then train the selected config");
  add_overrides(grid, common);
  grid->add_option("--run-root", common.run_root, "Artifact root (default: $CECMMR_RUN_ROOT or ./runs)");

  auto* ev = app.add_subcommand("eval", "Score a checkpoint on one split of the configured dataset");
  add_overrides(ev, common);
  ev->add_option("--checkpoint", eval.checkpoint, "checkpoint.bin")->required();
  ev->add_option("--split", eval.split, "Split index");
  ev->add_option("--subset", eval.subset, "train, test or all");

  auto* pd = app.add_subcommand("plotdata", "Range-plot rows (per-component mean, sigma, weight)");
  add_overrides(pd, common);
  pd->add_option("--checkpoint", plot.checkpoint, "checkpoint.bin")->required();
  pd->add_option("--x-min", plot.x_min, "Grid start (default: data minimum)");
  pd->add_option("--x-max", plot.x_max, "Grid end (default: data maximum)");
  pd->add_option("--points", plot.points, "Grid size");
  pd->add_option("--axis", plot.axis, "Input axis to vary for multi-dimensional inputs");
  pd->add_option("--base", plot.base_point, "Base point (original units) for --axis")->delimiter(',');
  pd->add_option("--format", plot.format, "csv or json");
  pd->add_option("--output,-o", plot.output, "Output file (default: stdout)");

  auto* tb = app.add_subcommand("table", "Results table from metrics.json files or run directories");
  tb->add_option("metrics", table.metrics, "metrics.json files or run directories")->required();
  tb->add_option("--style", table.style, "uci, bike or song");
  tb->add_flag("--scale100", table.scale, "Multiply log-likelihood cells by 100");
  tb->add_option("--precision", table.precision, "Decimals per cell");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage_error", e.what());
  }

  try {
    if (*train) return cmd_train(common);
    if (*grid) return cmd_grid(common);
    if (*ev) return cmd_eval(common, eval);
    if (*pd) return cmd_plotdata(common, plot);
    if (*tb) return cmd_table(table);
  } catch (const cecmmr::DataError& e) {
    json extra = json::object();
    if (e.line()) extra["line"] = *e.line();
    if (e.column()) extra["column"] = *e.column();
    return fail(e.kind(), e.what(), extra);
  } catch (const cecmmr::Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail("internal_error", e.what());
  }
  return fail("usage_error", "no subcommand");
}
