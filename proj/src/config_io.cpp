#include "cecmmr/config_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "cecmmr/errors.hpp"

namespace cecmmr {
namespace {

using nlohmann::json;

/// Object reader that remembers which keys were consumed so leftovers can be
/// reported as typos.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  void size(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) out = to_size(*v, key);
  }
  void u64(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) out = to_u64(*v, key);
  }
  void real(const std::string& key, double& out) {
    if (const json* v = find(key)) out = to_real(*v, key);
  }
  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }
  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) out = to_string(*v, key);
  }

  std::uint64_t to_u64(const json& v, const std::string& key) const {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    fail(key, "expected a non-negative integer");
  }
  std::size_t to_size(const json& v, const std::string& key) const {
    return static_cast<std::size_t>(to_u64(v, key));
  }
  double to_real(const json& v, const std::string& key) const {
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }
  std::string to_string(const json& v, const std::string& key) const {
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }
  std::pair<double, double> pair(const std::string& key, std::pair<double, double> fallback) {
    const json* v = find(key);
    if (v == nullptr) return fallback;
    if (!v->is_array() || v->size() != 2) fail(key, "expected an array of two numbers");
    return {to_real((*v)[0], key), to_real((*v)[1], key)};
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) {
        throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
      }
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(where_ + "." + key + ": " + what);
  }

  const std::string& where() const noexcept { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return std::filesystem::absolute(path).lexically_normal();
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Reason::kMissingFile, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string kind_name(DatasetRef::Kind kind) {
  switch (kind) {
    case DatasetRef::Kind::kTwoCircles:
      return "two_circles";
    case DatasetRef::Kind::kZigzag:
      return "zigzag";
    case DatasetRef::Kind::kEllipse:
      return "ellipse";
    case DatasetRef::Kind::kCsv:
      return "csv";
    case DatasetRef::Kind::kXyz:
      return "xyz";
  }
  return "csv";
}

std::string rule_name(ActivationRule rule) {
  return rule == ActivationRule::kWeightAboveEpsilon ? "above_epsilon" : "at_most_epsilon";
}

ActivationRule parse_rule(const std::string& text) {
  if (text == "above_epsilon") return ActivationRule::kWeightAboveEpsilon;
  if (text == "at_most_epsilon") return ActivationRule::kWeightAtMostEpsilon;
  throw ConfigError("pruning.rule: expected above_epsilon or at_most_epsilon, got '" + text + "'");
}

json dataset_to_json(const DatasetRef& d) {
  json j;
  j["kind"] = kind_name(d.kind);
  switch (d.kind) {
    case DatasetRef::Kind::kTwoCircles:
      j["n"] = d.n;
      j["seed"] = d.seed;
      j["radii"] = {d.circles.radii.first, d.circles.radii.second};
      j["noise_std"] = d.circles.noise_std;
      break;
    case DatasetRef::Kind::kZigzag:
      j["n"] = d.n;
      j["seed"] = d.seed;
      j["periods"] = d.zigzag.periods;
      j["amplitude"] = d.zigzag.amplitude;
      j["noise_std"] = d.zigzag.noise_std;
      break;
    case DatasetRef::Kind::kEllipse:
      j["n"] = d.n;
      j["seed"] = d.seed;
      j["semi_axes"] = {d.ellipse.semi_axes.first, d.ellipse.semi_axes.second};
      j["noise_std"] = d.ellipse.noise_std;
      break;
    case DatasetRef::Kind::kCsv:
      j["path"] = d.path.generic_string();
      j["target"] = d.target_column;
      j["delimiter"] = std::string(1, d.csv.delimiter);
      j["drop_constant_columns"] = d.csv.drop_constant_columns;
      j["max_rows"] = d.csv.max_rows;
      j["subsample_seed"] = d.csv.subsample_seed;
      break;
    case DatasetRef::Kind::kXyz:
      j["path"] = d.path.generic_string();
      break;
  }
  return j;
}

DatasetRef dataset_from_json(const json& j, const std::filesystem::path& base,
                             std::optional<SplitSpec>& manifest_split) {
  Fields f(j, "dataset");
  std::string kind;
  f.string("kind", kind);
  DatasetRef d;
  if (kind == "manifest") {
    std::string manifest = "data/manifest.json";
    std::string name;
    f.string("manifest", manifest);
    f.string("name", name);
    if (name.empty()) throw ConfigError("dataset: a manifest reference needs a 'name'");
    DatasetRef resolved;
    resolved.kind = DatasetRef::Kind::kCsv;
    f.size("max_rows", resolved.csv.max_rows);
    f.u64("subsample_seed", resolved.csv.subsample_seed);
    f.finish();
    const auto manifest_path = resolve(base, manifest);
    const json m = read_json_file(manifest_path);
    if (!m.is_object() || !m.contains(name)) {
      throw ConfigError("dataset: manifest '" + manifest_path.string() + "' has no entry '" + name + "'");
    }
    Fields entry(m.at(name), "manifest." + name);
    std::string file;
    std::string preset;
    entry.string("file", file);
    entry.string("target", resolved.target_column);
    entry.string("split_preset", preset);
    entry.finish();
    if (file.empty()) throw ConfigError("manifest." + name + ": missing 'file'");
    resolved.path = resolve(manifest_path.parent_path(), file);
    if (!preset.empty()) manifest_split = SplitSpec::preset(preset);
    return resolved;
  }
  if (kind == "two_circles") {
    d.kind = DatasetRef::Kind::kTwoCircles;
    d.circles.radii = f.pair("radii", d.circles.radii);
    f.real("noise_std", d.circles.noise_std);
  } else if (kind == "zigzag") {
    d.kind = DatasetRef::Kind::kZigzag;
    f.size("periods", d.zigzag.periods);
    f.real("amplitude", d.zigzag.amplitude);
    f.real("noise_std", d.zigzag.noise_std);
  } else if (kind == "ellipse") {
    d.kind = DatasetRef::Kind::kEllipse;
    d.ellipse.semi_axes = f.pair("semi_axes", d.ellipse.semi_axes);
    f.real("noise_std", d.ellipse.noise_std);
  } else if (kind == "csv" || kind == "xyz") {
    d.kind = kind == "csv" ? DatasetRef::Kind::kCsv : DatasetRef::Kind::kXyz;
    std::string path;
    f.string("path", path);
    if (path.empty()) throw ConfigError("dataset: '" + kind + "' needs a 'path'");
    d.path = resolve(base, path);
    if (kind == "csv") {
      f.string("target", d.target_column);
      std::string delim = ",";
      f.string("delimiter", delim);
      if (delim.size() != 1) f.fail("delimiter", "expected a single character");
      d.csv.delimiter = delim[0];
      f.boolean("drop_constant_columns", d.csv.drop_constant_columns);
      f.size("max_rows", d.csv.max_rows);
      f.u64("subsample_seed", d.csv.subsample_seed);
    }
  } else {
    throw ConfigError("dataset.kind: expected two_circles, zigzag, ellipse, csv, xyz or manifest, got '" +
                      kind + "'");
  }
  if (d.kind != DatasetRef::Kind::kCsv && d.kind != DatasetRef::Kind::kXyz) {
    f.size("n", d.n);
    f.u64("seed", d.seed);
  }
  f.finish();
  return d;
}

json grid_to_json(const GridRanges& g) {
  return {{"hidden_layers", g.hidden_layers},
          {"hidden_width", g.hidden_width},
          {"batch_size", g.batch_size},
          {"learning_rate", g.learning_rate}};
}

GridRanges grid_from_json(const json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "uci") return GridRanges::uci();
    if (name == "large" || name == "bike" || name == "song") return GridRanges::large();
    throw ConfigError("grid: unknown preset '" + name + "' (expected uci or large)");
  }
  Fields f(j, "grid");
  GridRanges g = GridRanges::uci();
  auto sizes = [&](const std::string& key, std::vector<std::size_t>& out) {
    if (const json* v = f.find(key)) {
      if (!v->is_array()) f.fail(key, "expected an array");
      out.clear();
      for (const auto& x : *v) out.push_back(f.to_size(x, key));
    }
  };
  sizes("hidden_layers", g.hidden_layers);
  sizes("hidden_width", g.hidden_width);
  sizes("batch_size", g.batch_size);
  if (const json* v = f.find("learning_rate")) {
    if (!v->is_array()) f.fail("learning_rate", "expected an array");
    g.learning_rate.clear();
    for (const auto& x : *v) g.learning_rate.push_back(f.to_real(x, "learning_rate"));
  }
  f.finish();
  return g;
}

json toml_node_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [key, value] : *t) out[std::string(key.str())] = toml_node_to_json(value);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& value : *a) out.push_back(toml_node_to_json(value));
    return out;
  }
  if (const auto* s = node.as_string()) return s->get();
  if (const auto* i = node.as_integer()) {
    const std::int64_t v = i->get();
    if (v >= 0) return static_cast<std::uint64_t>(v);
    return v;
  }
  if (const auto* d = node.as_floating_point()) return d->get();
  if (const auto* b = node.as_boolean()) return b->get();
  throw ConfigError("config: date and time values are not supported");
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["dataset"] = dataset_to_json(c.dataset);
  j["split"] = {{"train_fraction", c.split.train_fraction},
                {"num_splits", c.split.num_splits},
                {"num_runs", c.split.num_runs},
                {"seed", c.split.seed}};
  j["loss"] = {{"kind", std::string(to_string(c.loss.kind))},
               {"domain", std::string(to_string(c.loss.domain))}};
  j["components"] = c.components;
  j["network"] = {{"hidden_layers", c.network.hidden_layers},
                  {"hidden_width", c.network.hidden_width},
                  {"dropout", c.network.dropout_rate},
                  {"batchnorm", c.network.batchnorm_enabled},
                  {"batchnorm_momentum", c.network.batchnorm_momentum},
                  {"batchnorm_epsilon", c.network.batchnorm_epsilon}};
  j["sigma"] = {{"min", c.sigma.min}, {"max", c.sigma.max}};
  j["pruning"] = {{"epsilon", c.pruning.epsilon}, {"rule", rule_name(c.pruning.rule)}};
  j["prune"] = c.prune ? json(*c.prune) : json(nullptr);
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["seed"] = c.seed;
  j["seeds"] = c.seeds;
  j["predictor"] = std::string(to_string(c.predictor));
  j["log_every"] = c.log_every;
  j["grid"] = c.grid ? grid_to_json(*c.grid) : json(nullptr);
  j["selection"] = c.selection == SelectionMetric::kLogLikelihood ? "log_likelihood" : "rmse";
  j["validation_fraction"] = c.validation_fraction;
  return j;
}

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  Fields f(j, "config");
  ExperimentConfig c;
  f.string("name", c.name);
  if (c.name.empty()) throw ConfigError("config.name: must not be empty");

  std::optional<SplitSpec> manifest_split;
  if (const json* d = f.find("dataset")) c.dataset = dataset_from_json(*d, base_dir, manifest_split);

  if (const json* s = f.find("split")) {
    Fields sf(*s, "split");
    std::string preset;
    sf.string("preset", preset);
    c.split = !preset.empty() ? SplitSpec::preset(preset) : manifest_split.value_or(c.split);
    sf.real("train_fraction", c.split.train_fraction);
    sf.size("num_splits", c.split.num_splits);
    sf.size("num_runs", c.split.num_runs);
    sf.u64("seed", c.split.seed);
    sf.finish();
  } else if (manifest_split) {
    c.split = *manifest_split;
  }

  if (const json* l = f.find("loss")) {
    if (l->is_string()) {
      c.loss.kind = parse_loss_kind(l->get<std::string>());
    } else {
      Fields lf(*l, "loss");
      std::string kind(to_string(c.loss.kind));
      std::string domain(to_string(c.loss.domain));
      lf.string("kind", kind);
      lf.string("domain", domain);
      lf.finish();
      c.loss.kind = parse_loss_kind(kind);
      c.loss.domain = parse_loss_domain(domain);
    }
  }
  f.size("components", c.components);

  if (const json* n = f.find("network")) {
    Fields nf(*n, "network");
    nf.size("hidden_layers", c.network.hidden_layers);
    nf.size("hidden_width", c.network.hidden_width);
    nf.real("dropout", c.network.dropout_rate);
    nf.boolean("batchnorm", c.network.batchnorm_enabled);
    nf.real("batchnorm_momentum", c.network.batchnorm_momentum);
    nf.real("batchnorm_epsilon", c.network.batchnorm_epsilon);
    nf.finish();
  }
  if (const json* s = f.find("sigma")) {
    Fields sf(*s, "sigma");
    sf.real("min", c.sigma.min);
    sf.real("max", c.sigma.max);
    sf.finish();
  }
  if (const json* p = f.find("pruning")) {
    Fields pf(*p, "pruning");
    pf.real("epsilon", c.pruning.epsilon);
    std::string rule = rule_name(c.pruning.rule);
    pf.string("rule", rule);
    pf.finish();
    c.pruning.rule = parse_rule(rule);
  }
  if (const json* p = f.find("prune")) {
    if (!p->is_boolean()) f.fail("prune", "expected true, false or null");
    c.prune = p->get<bool>();
  }
  f.size("epochs", c.epochs);
  f.size("batch_size", c.batch_size);
  f.real("learning_rate", c.learning_rate);
  f.u64("seed", c.seed);
  if (const json* s = f.find("seeds")) {
    if (!s->is_array()) f.fail("seeds", "expected an array of integers");
    for (const auto& v : *s) c.seeds.push_back(f.to_u64(v, "seeds"));
  }
  if (const json* p = f.find("predictor")) c.predictor = parse_point_predictor(f.to_string(*p, "predictor"));
  f.size("log_every", c.log_every);
  if (const json* g = f.find("grid")) c.grid = grid_from_json(*g);
  if (const json* s = f.find("selection")) {
    const std::string text = f.to_string(*s, "selection");
    if (text == "log_likelihood") {
      c.selection = SelectionMetric::kLogLikelihood;
    } else if (text == "rmse") {
      c.selection = SelectionMetric::kRmse;
    } else {
      f.fail("selection", "expected log_likelihood or rmse");
    }
  }
  f.real("validation_fraction", c.validation_fraction);
  f.finish();

  c.validate();
  return c;
}

json toml_to_json(std::string_view text, const std::string& source) {
  try {
    const toml::table table = toml::parse(text, source);
    return toml_node_to_json(table);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": "
        << e.description();
    throw ConfigError(msg.str());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const auto base = std::filesystem::absolute(path).parent_path();
  if (path.extension() == ".toml") {
    std::ifstream in(path);
    if (!in) throw DataError(DataError::Reason::kMissingFile, "cannot open '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return config_from_json(toml_to_json(buffer.str(), path.string()), base);
  }
  return config_from_json(read_json_file(path), base);
}

void apply_overrides(ExperimentConfig& config, const ConfigOverrides& o) {
  if (o.loss) config.loss.kind = parse_loss_kind(*o.loss);
  if (o.components) config.components = *o.components;
  if (o.epsilon) config.pruning.epsilon = *o.epsilon;
  if (o.seed) config.seed = *o.seed;
  if (o.epochs) config.epochs = *o.epochs;
  if (o.literal_loss) config.loss.domain = LossDomain::kLiteral;
  config.validate();
}

}  // namespace cecmmr
