#include "cecmmr/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "cecmmr/errors.hpp"

namespace cecmmr {
namespace {

constexpr std::array<char, 8> kMagic{'C', 'E', 'C', 'M', 'M', 'R', 'v', '1'};
// Guards against absurd allocations from a corrupt length field.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void vec(const Vector& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void mat(const Matrix& m) {
    u64(m.rows());
    u64(m.cols());
    for (double x : m.flat()) f64(x);
  }
  void layer(const LayerParams& p) {
    mat(p.weight);
    vec(p.bias);
    vec(p.gamma);
    vec(p.beta);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint8_t u8() {
    const int c = in_.get();
    if (c == std::char_traits<char>::eof()) fail("unexpected end of file");
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::size_t count() {
    const std::uint64_t n = u64();
    if (n > kMaxElements) fail("length field out of range");
    return static_cast<std::size_t>(n);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  Vector vec() {
    Vector v(count());
    for (double& x : v) x = f64();
    return v;
  }
  Matrix mat() {
    const std::size_t r = count();
    const std::size_t c = count();
    if (c != 0 && r > kMaxElements / c) fail("matrix shape out of range");
    Matrix m(r, c);
    for (double& x : m.flat()) x = f64();
    return m;
  }
  LayerParams layer() {
    LayerParams p;
    p.weight = mat();
    p.bias = vec();
    p.gamma = vec();
    p.beta = vec();
    return p;
  }
  std::vector<LayerParams> layers() {
    std::vector<LayerParams> out(count());
    for (auto& p : out) p = layer();
    return out;
  }

  [[noreturn]] static void fail(const std::string& what) {
    throw DataError(DataError::Reason::kMalformedLine, "checkpoint: " + what);
  }

 private:
  std::istream& in_;
};

void check_consistent(const FittedModel& f) {
  const NetworkState& net = f.model.network;
  const HeadState& head = f.model.head;
  net.config.validate();
  head.sigma.validate();
  f.pruning.validate();
  const std::size_t layers = net.config.hidden_layers;
  if (net.layers.size() != layers || net.adam_m.size() != layers || net.adam_v.size() != layers ||
      net.batchnorm.size() != layers) {
    Reader::fail("layer count does not match the network config");
  }
  std::size_t width_in = net.config.input_dim;
  for (std::size_t l = 0; l < layers; ++l) {
    const LayerParams& p = net.layers[l];
    const std::size_t w = net.config.hidden_width;
    if (p.weight.rows() != w || p.weight.cols() != width_in || p.bias.size() != w ||
        p.gamma.size() != w || p.beta.size() != w || !p.same_shape(net.adam_m[l]) ||
        !p.same_shape(net.adam_v[l]) || net.batchnorm[l].mean.size() != w ||
        net.batchnorm[l].var.size() != w) {
      Reader::fail("layer " + std::to_string(l) + " has inconsistent shapes");
    }
    width_in = w;
  }
  const std::size_t rows = 3 * head.components;
  if (head.components == 0 || head.feature_width != width_in || head.weight.rows() != rows ||
      head.weight.cols() != width_in || head.bias.size() != rows ||
      !head.adam_m_weight.same_shape(head.weight) || !head.adam_v_weight.same_shape(head.weight) ||
      head.adam_m_bias.size() != rows || head.adam_v_bias.size() != rows) {
    Reader::fail("head has inconsistent shapes");
  }
  if (f.stats.feature_means.size() != net.config.input_dim ||
      f.stats.feature_stds.size() != net.config.input_dim) {
    Reader::fail("standardization does not match the input dimension");
  }
  for (std::size_t c : f.active_set) {
    if (c >= head.components) Reader::fail("active component index out of range");
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const FittedModel& f) {
  Writer w(out);
  out.write(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);

  const NetworkState& net = f.model.network;
  const NetworkConfig& c = net.config;
  w.u64(c.input_dim);
  w.u64(c.hidden_layers);
  w.u64(c.hidden_width);
  w.f64(c.dropout_rate);
  w.u8(c.batchnorm_enabled ? 1 : 0);
  w.u64(c.seed);
  w.f64(c.batchnorm_momentum);
  w.f64(c.batchnorm_epsilon);

  for (const auto* group : {&net.layers, &net.adam_m, &net.adam_v}) {
    w.u64(group->size());
    for (const auto& p : *group) w.layer(p);
  }
  w.u64(net.batchnorm.size());
  for (const auto& bn : net.batchnorm) {
    w.vec(bn.mean);
    w.vec(bn.var);
  }
  w.u64(net.step_count);

  const HeadState& head = f.model.head;
  w.u64(head.components);
  w.u64(head.feature_width);
  w.f64(head.sigma.min);
  w.f64(head.sigma.max);
  w.mat(head.weight);
  w.vec(head.bias);
  w.mat(head.adam_m_weight);
  w.mat(head.adam_v_weight);
  w.vec(head.adam_m_bias);
  w.vec(head.adam_v_bias);
  w.u64(head.step_count);

  w.vec(f.stats.feature_means);
  w.vec(f.stats.feature_stds);
  w.f64(f.stats.target_mean);
  w.f64(f.stats.target_std);

  w.f64(f.pruning.epsilon);
  w.u8(f.pruning.rule == ActivationRule::kWeightAboveEpsilon ? 0 : 1);
  w.u8(f.prune ? 1 : 0);
  w.u64(f.active_set.size());
  for (std::size_t i : f.active_set) w.u64(i);
  if (!out) throw DataError(DataError::Reason::kMissingFile, "checkpoint: write failed");
}

FittedModel read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) Reader::fail("bad magic (not a checkpoint file)");
  Reader r(in);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    Reader::fail("unsupported version " + std::to_string(version));
  }

  FittedModel f;
  NetworkState& net = f.model.network;
  NetworkConfig& c = net.config;
  c.input_dim = r.count();
  c.hidden_layers = r.count();
  c.hidden_width = r.count();
  c.dropout_rate = r.f64();
  c.batchnorm_enabled = r.u8() != 0;
  c.seed = r.u64();
  c.batchnorm_momentum = r.f64();
  c.batchnorm_epsilon = r.f64();

  net.layers = r.layers();
  net.adam_m = r.layers();
  net.adam_v = r.layers();
  net.batchnorm.resize(r.count());
  for (auto& bn : net.batchnorm) {
    bn.mean = r.vec();
    bn.var = r.vec();
  }
  net.step_count = r.u64();

  HeadState& head = f.model.head;
  head.components = r.count();
  head.feature_width = r.count();
  head.sigma.min = r.f64();
  head.sigma.max = r.f64();
  head.weight = r.mat();
  head.bias = r.vec();
  head.adam_m_weight = r.mat();
  head.adam_v_weight = r.mat();
  head.adam_m_bias = r.vec();
  head.adam_v_bias = r.vec();
  head.step_count = r.u64();

  f.stats.feature_means = r.vec();
  f.stats.feature_stds = r.vec();
  f.stats.target_mean = r.f64();
  f.stats.target_std = r.f64();

  f.pruning.epsilon = r.f64();
  f.pruning.rule = r.u8() == 0 ? ActivationRule::kWeightAboveEpsilon : ActivationRule::kWeightAtMostEpsilon;
  f.prune = r.u8() != 0;
  f.active_set.resize(r.count());
  for (auto& i : f.active_set) i = r.count();

  try {
    check_consistent(f);
  } catch (const ConfigError& e) {
    Reader::fail(e.what());
  }
  return f;
}

void save_checkpoint(const std::filesystem::path& path, const FittedModel& fitted) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Reason::kMissingFile, "cannot write '" + path.string() + "'");
  write_checkpoint(out, fitted);
}

FittedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Reason::kMissingFile, "cannot open '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace cecmmr
