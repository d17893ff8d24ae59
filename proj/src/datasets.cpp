#include "cecmmr/datasets.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "cecmmr/errors.hpp"
#include "cecmmr/rng.hpp"

namespace cecmmr {
namespace {

using Reason = DataError::Reason;

void require_points(std::size_t n, const char* what) {
  if (n == 0) throw ConfigError(std::string(what) + ": n must be positive");
}

RegressionDataset make_1d(std::string name, std::size_t n) {
  RegressionDataset ds;
  ds.name = std::move(name);
  ds.inputs = Matrix(n, 1);
  ds.targets.resize(n);
  ds.feature_names = {"x"};
  ds.stats.feature_means = {0.0};
  ds.stats.feature_stds = {1.0};
  return ds;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  s = s.substr(first, last - first + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == delimiter && !quoted) {
      fields.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  fields.push_back(trim(line.substr(start)));
  return fields;
}

bool parse_double(std::string_view text, double& value) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(value);
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(Reason::kMissingFile, "cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

Vector Standardization::features_to_standardized(std::span<const double> raw) const {
  if (raw.size() != feature_means.size()) {
    throw DimensionError("standardization: feature count mismatch");
  }
  Vector out(raw.size());
  for (std::size_t c = 0; c < raw.size(); ++c) out[c] = (raw[c] - feature_means[c]) / feature_stds[c];
  return out;
}

RegressionDataset RegressionDataset::subset(std::span<const std::size_t> indices) const {
  RegressionDataset out;
  out.name = name;
  out.inputs = gather_rows(inputs, indices);
  out.targets = gather(targets, indices);
  out.feature_names = feature_names;
  out.target_name = target_name;
  out.stats = stats;
  return out;
}

RegressionDataset gen_two_circles(std::size_t n, const TwoCirclesOptions& options,
                                  std::uint64_t seed) {
  require_points(n, "gen_two_circles");
  const auto [r1, r2] = options.radii;
  if (!(r1 > 0.0) || !(r2 > 0.0) || r1 == r2) {
    throw ConfigError("gen_two_circles: radii must be positive and distinct");
  }
  if (!(options.noise_std >= 0.0)) throw ConfigError("gen_two_circles: noise_std must be >= 0");
  RegressionDataset ds = make_1d("two_circles", n);
  Rng rng(seed);
  std::bernoulli_distribution which(0.5);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double r = which(rng) ? r2 : r1;
    const double t = angle(rng);
    const double e = noise(rng);
    ds.inputs(j, 0) = r * std::cos(t);
    ds.targets[j] = r * std::sin(t) + options.noise_std * e;
  }
  return ds;
}

double zigzag_value(double x, std::size_t periods, double amplitude) {
  const double phase = static_cast<double>(periods) * x;
  const double frac = phase - std::floor(phase);
  return amplitude * (2.0 * std::abs(2.0 * frac - 1.0) - 1.0);
}

RegressionDataset gen_zigzag(std::size_t n, const ZigzagOptions& options, std::uint64_t seed) {
  require_points(n, "gen_zigzag");
  if (options.periods == 0) throw ConfigError("gen_zigzag: periods must be >= 1");
  if (!(options.amplitude > 0.0)) throw ConfigError("gen_zigzag: amplitude must be positive");
  if (!(options.noise_std >= 0.0)) throw ConfigError("gen_zigzag: noise_std must be >= 0");
  RegressionDataset ds = make_1d("zigzag", n);
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double x = unit(rng);
    const double e = noise(rng);
    ds.inputs(j, 0) = x;
    ds.targets[j] = zigzag_value(x, options.periods, options.amplitude) + options.noise_std * e;
  }
  return ds;
}

RegressionDataset gen_ellipse(std::size_t n, const EllipseOptions& options, std::uint64_t seed) {
  require_points(n, "gen_ellipse");
  const auto [a, b] = options.semi_axes;
  if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("gen_ellipse: semi-axes must be positive");
  if (!(options.noise_std >= 0.0)) throw ConfigError("gen_ellipse: noise_std must be >= 0");
  RegressionDataset ds = make_1d("ellipse", n);
  Rng rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double t = angle(rng);
    const double e = noise(rng);
    ds.inputs(j, 0) = a * std::cos(t);
    ds.targets[j] = b * std::sin(t) + options.noise_std * e;
  }
  return ds;
}

RegressionDataset load_csv(const std::filesystem::path& path, const std::string& target_column,
                           const CsvOptions& options) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      for (auto f : split_fields(line, options.delimiter)) header.emplace_back(f);
      break;
    }
  }
  if (header.empty()) throw DataError(Reason::kEmpty, "'" + path.string() + "' has no header row");
  const auto target_it = std::find(header.begin(), header.end(), target_column);
  if (target_it == header.end()) {
    throw DataError(Reason::kMissingColumn,
                    "target column '" + target_column + "' not found in '" + path.string() + "'",
                    line_no);
  }
  const std::size_t target_idx = static_cast<std::size_t>(target_it - header.begin());

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, options.delimiter);
    if (fields.size() != header.size()) {
      throw DataError(Reason::kMalformedLine,
                      "expected " + std::to_string(header.size()) + " fields, found " +
                          std::to_string(fields.size()),
                      line_no);
    }
    std::vector<double> values(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_double(fields[c], values[c])) {
        throw DataError(Reason::kNonNumeric,
                        "non-numeric cell '" + std::string(fields[c]) + "' in column '" +
                            header[c] + "'",
                        line_no, c + 1);
      }
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError(Reason::kEmpty, "'" + path.string() + "' has no data rows");

  if (options.max_rows > 0 && rows.size() > options.max_rows) {
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(options.subsample_seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(options.max_rows);
    std::sort(order.begin(), order.end());
    std::vector<std::vector<double>> kept;
    kept.reserve(order.size());
    for (std::size_t r : order) kept.push_back(std::move(rows[r]));
    rows = std::move(kept);
  }

  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == target_idx) continue;
    bool constant = true;
    for (const auto& r : rows) {
      if (r[c] != rows.front()[c]) {
        constant = false;
        break;
      }
    }
    if (constant && options.drop_constant_columns) continue;
    feature_cols.push_back(c);
  }

  RegressionDataset ds;
  ds.name = path.stem().string();
  ds.target_name = target_column;
  ds.inputs = Matrix(rows.size(), feature_cols.size());
  ds.targets.resize(rows.size());
  for (std::size_t c : feature_cols) ds.feature_names.push_back(header[c]);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t f = 0; f < feature_cols.size(); ++f) ds.inputs(j, f) = rows[j][feature_cols[f]];
    ds.targets[j] = rows[j][target_idx];
  }
  ds.stats.feature_means.assign(feature_cols.size(), 0.0);
  ds.stats.feature_stds.assign(feature_cols.size(), 1.0);
  return ds;
}

RegressionDataset load_xyz_pointcloud(const std::filesystem::path& path) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::array<double, 3>> points;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    std::string normalized(view);
    std::replace(normalized.begin(), normalized.end(), ',', ' ');
    std::istringstream fields(normalized);
    std::array<double, 3> p{};
    std::string token;
    std::size_t count = 0;
    while (fields >> token) {
      if (count == 3) {
        throw DataError(Reason::kMalformedLine, "expected 3 coordinates, found more", line_no);
      }
      if (!parse_double(token, p[count])) {
        throw DataError(Reason::kMalformedLine, "non-numeric coordinate '" + token + "'", line_no,
                        count + 1);
      }
      ++count;
    }
    if (count != 3) {
      throw DataError(Reason::kMalformedLine,
                      "expected 3 coordinates, found " + std::to_string(count), line_no);
    }
    points.push_back(p);
  }
  if (points.empty()) throw DataError(Reason::kEmpty, "'" + path.string() + "' has no points");
  RegressionDataset ds;
  ds.name = path.stem().string();
  ds.inputs = Matrix(points.size(), 2);
  ds.targets.resize(points.size());
  ds.feature_names = {"x", "y"};
  ds.target_name = "z";
  for (std::size_t j = 0; j < points.size(); ++j) {
    ds.inputs(j, 0) = points[j][0];
    ds.inputs(j, 1) = points[j][1];
    ds.targets[j] = points[j][2];
  }
  ds.stats.feature_means.assign(2, 0.0);
  ds.stats.feature_stds.assign(2, 1.0);
  return ds;
}

void write_xyz_pointcloud(const std::filesystem::path& path, const RegressionDataset& dataset) {
  if (dataset.dims() != 2) throw DimensionError("write_xyz_pointcloud: dataset must have 2 inputs");
  std::ofstream out(path);
  if (!out) throw DataError(Reason::kMissingFile, "cannot write '" + path.string() + "'");
  out.precision(17);
  for (std::size_t j = 0; j < dataset.size(); ++j) {
    out << dataset.inputs(j, 0) << ' ' << dataset.inputs(j, 1) << ' ' << dataset.targets[j] << '\n';
  }
}

RegressionDataset standardize(const RegressionDataset& dataset,
                              std::span<const std::size_t> train_indices) {
  if (train_indices.empty()) {
    throw DataError(Reason::kInvalidArgument, "standardize: no training indices");
  }
  const std::size_t d = dataset.dims();
  const double m = static_cast<double>(train_indices.size());
  for (std::size_t j : train_indices) {
    if (j >= dataset.size()) throw DimensionError("standardize: training index out of range");
  }

  auto moments = [&](auto value_of) {
    double mean = 0.0;
    for (std::size_t j : train_indices) mean += value_of(j);
    mean /= m;
    double var = 0.0;
    for (std::size_t j : train_indices) {
      const double dv = value_of(j) - mean;
      var += dv * dv;
    }
    return std::pair{mean, std::sqrt(var / m)};
  };

  RegressionDataset out = dataset;
  Standardization local;
  local.feature_means.resize(d);
  local.feature_stds.resize(d);
  for (std::size_t c = 0; c < d; ++c) {
    auto [mean, sd] = moments([&](std::size_t j) { return dataset.inputs(j, c); });
    local.feature_means[c] = mean;
    local.feature_stds[c] = sd > 0.0 ? sd : 1.0;
  }
  auto [tmean, tsd] = moments([&](std::size_t j) { return dataset.targets[j]; });
  if (!(tsd > 0.0)) {
    throw DataError(Reason::kZeroVariance, "standardize: training target has zero variance");
  }
  local.target_mean = tmean;
  local.target_std = tsd;

  for (std::size_t j = 0; j < dataset.size(); ++j) {
    for (std::size_t c = 0; c < d; ++c) {
      out.inputs(j, c) = (dataset.inputs(j, c) - local.feature_means[c]) / local.feature_stds[c];
    }
    out.targets[j] = (dataset.targets[j] - tmean) / tsd;
  }

  // Compose with whatever standardization the input already carried.
  const Standardization& prior = dataset.stats;
  Standardization& s = out.stats;
  s.feature_means.resize(d);
  s.feature_stds.resize(d);
  for (std::size_t c = 0; c < d; ++c) {
    const double pm = c < prior.feature_means.size() ? prior.feature_means[c] : 0.0;
    const double ps = c < prior.feature_stds.size() ? prior.feature_stds[c] : 1.0;
    s.feature_means[c] = local.feature_means[c] * ps + pm;
    s.feature_stds[c] = local.feature_stds[c] * ps;
  }
  s.target_mean = local.target_mean * prior.target_std + prior.target_mean;
  s.target_std = local.target_std * prior.target_std;
  return out;
}

RegressionDataset apply_standardization(const RegressionDataset& raw, const Standardization& stats) {
  if (stats.feature_means.size() != raw.dims()) {
    throw DimensionError("apply_standardization: feature count mismatch");
  }
  RegressionDataset out = raw;
  for (std::size_t j = 0; j < raw.size(); ++j) {
    auto row = out.inputs.row(j);
    for (std::size_t c = 0; c < row.size(); ++c) {
      row[c] = (row[c] - stats.feature_means[c]) / stats.feature_stds[c];
    }
    out.targets[j] = stats.target_to_standardized(raw.targets[j]);
  }
  out.stats = stats;
  return out;
}

SplitSpec SplitSpec::preset(const std::string& name) {
  if (name == "uci") return uci();
  if (name == "bike") return bike();
  if (name == "song") return song();
  throw ConfigError("unknown split preset '" + name + "' (expected uci, bike or song)");
}

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("split: train_fraction must lie in (0, 1)");
  }
  if (num_splits == 0) throw ConfigError("split: num_splits must be positive");
  if (num_runs == 0) throw ConfigError("split: num_runs must be positive");
}

std::vector<Split> make_splits(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  const auto train_size =
      static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  if (train_size == 0 || train_size >= n) {
    throw ConfigError("split: fraction " + std::to_string(spec.train_fraction) + " of " +
                      std::to_string(n) + " samples leaves one side empty");
  }
  std::vector<Split> splits;
  splits.reserve(spec.num_splits);
  for (std::size_t s = 0; s < spec.num_splits; ++s) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(spec.seed, s));
    std::shuffle(order.begin(), order.end(), rng);
    Split split;
    split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_size));
    split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(train_size), order.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    splits.push_back(std::move(split));
  }
  return splits;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) noexcept {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace cecmmr
