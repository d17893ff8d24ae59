#include "cecmmr/network.hpp"

#include <cmath>
#include <string>

#include "cecmmr/errors.hpp"

namespace cecmmr {
namespace {

// out(i, o) = x(i, :) . w(o, :) + b(o)
void affine(const Matrix& x, const Matrix& w, const Vector& b, Matrix& out) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xi = x.row(i);
    for (std::size_t o = 0; o < w.rows(); ++o) out(i, o) = kernels::dot(xi, w.row(o)) + b[o];
  }
}

LayerParams make_layer(std::size_t in, std::size_t out) {
  LayerParams p;
  p.weight = Matrix(out, in);
  p.bias.assign(out, 0.0);
  p.gamma.assign(out, 0.0);
  p.beta.assign(out, 0.0);
  return p;
}

template <typename Fn>
void for_each_block(LayerParams& p, Fn&& fn) {
  fn(p.weight.flat());
  fn(std::span<double>(p.bias));
  fn(std::span<double>(p.gamma));
  fn(std::span<double>(p.beta));
}

template <typename Fn>
void for_each_block(const LayerParams& p, Fn&& fn) {
  fn(p.weight.flat());
  fn(std::span<const double>(p.bias));
  fn(std::span<const double>(p.gamma));
  fn(std::span<const double>(p.beta));
}

ForwardResult run_forward(const NetworkState& state, const Matrix& batch, Mode mode, Rng* rng,
                          std::vector<BatchNormRunning>* running_out) {
  const NetworkConfig& cfg = state.config;
  if (batch.cols() != cfg.input_dim) {
    throw DimensionError("forward: batch has " + std::to_string(batch.cols()) +
                         " columns, network expects " + std::to_string(cfg.input_dim));
  }
  const std::size_t n = batch.rows();
  if (n == 0) throw DimensionError("forward: empty batch");
  const bool train = mode == Mode::kTrain;
  if (train && cfg.batchnorm_enabled && n < 2) {
    throw DimensionError("forward: train-mode batch norm needs at least 2 samples");
  }
  const bool dropout = train && cfg.dropout_rate > 0.0;
  const double keep = 1.0 - cfg.dropout_rate;

  ForwardResult result;
  result.trace.mode = mode;
  result.trace.layers.resize(state.layers.size());
  Matrix current = batch;

  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    const LayerParams& p = state.layers[l];
    LayerTrace& t = result.trace.layers[l];
    const std::size_t width = p.weight.rows();
    Matrix z(n, width);
    affine(current, p.weight, p.bias, z);
    t.input = std::move(current);

    if (cfg.batchnorm_enabled) {
      Vector mean(width, 0.0);
      Vector var(width, 0.0);
      if (train) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t o = 0; o < width; ++o) mean[o] += z(i, o);
        }
        for (std::size_t o = 0; o < width; ++o) mean[o] /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t o = 0; o < width; ++o) {
            const double d = z(i, o) - mean[o];
            var[o] += d * d;
          }
        }
        for (std::size_t o = 0; o < width; ++o) var[o] /= static_cast<double>(n);
        if (running_out != nullptr) {
          BatchNormRunning& r = (*running_out)[l];
          const double mom = cfg.batchnorm_momentum;
          const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
          for (std::size_t o = 0; o < width; ++o) {
            r.mean[o] = mom * r.mean[o] + (1.0 - mom) * mean[o];
            r.var[o] = mom * r.var[o] + (1.0 - mom) * var[o] * unbias;
          }
        }
      } else {
        mean = state.batchnorm[l].mean;
        var = state.batchnorm[l].var;
      }
      t.inv_std.resize(width);
      for (std::size_t o = 0; o < width; ++o) {
        t.inv_std[o] = 1.0 / std::sqrt(var[o] + cfg.batchnorm_epsilon);
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < width; ++o) z(i, o) = (z(i, o) - mean[o]) * t.inv_std[o];
      }
      t.normalized = z;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < width; ++o) z(i, o) = p.gamma[o] * z(i, o) + p.beta[o];
      }
    } else {
      t.normalized = z;
    }

    for (double& v : z.flat()) v = std::tanh(v);
    t.activation = z;

    if (dropout) {
      std::bernoulli_distribution keep_draw(keep);
      t.mask = Matrix(n, width);
      const double scale = 1.0 / keep;
      for (std::size_t idx = 0; idx < z.size(); ++idx) {
        const double m = keep_draw(*rng) ? scale : 0.0;
        t.mask.flat()[idx] = m;
        z.flat()[idx] *= m;
      }
    }
    current = std::move(z);
  }
  result.features = std::move(current);
  return result;
}

}  // namespace

void NetworkConfig::validate() const {
  if (input_dim == 0) throw ConfigError("network: input_dim must be positive");
  if (hidden_layers == 0) throw ConfigError("network: hidden_layers must be positive");
  if (hidden_width == 0) throw ConfigError("network: hidden_width must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("network: dropout_rate must lie in [0, 1)");
  }
  if (!(batchnorm_momentum >= 0.0 && batchnorm_momentum < 1.0)) {
    throw ConfigError("network: batchnorm_momentum must lie in [0, 1)");
  }
  if (!(batchnorm_epsilon > 0.0)) throw ConfigError("network: batchnorm_epsilon must be positive");
}

LayerParams LayerParams::zeros_like(const LayerParams& other) {
  LayerParams p = make_layer(other.weight.cols(), other.weight.rows());
  return p;
}

bool LayerParams::same_shape(const LayerParams& other) const noexcept {
  return weight.same_shape(other.weight) && bias.size() == other.bias.size() &&
         gamma.size() == other.gamma.size() && beta.size() == other.beta.size();
}

NetworkState init_network(const NetworkConfig& config) {
  config.validate();
  NetworkState state;
  state.config = config;
  Rng rng(config.seed);
  std::size_t in = config.input_dim;
  for (std::size_t l = 0; l < config.hidden_layers; ++l) {
    const std::size_t out = config.hidden_width;
    LayerParams p = make_layer(in, out);
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : p.weight.flat()) w = dist(rng);
    p.gamma.assign(out, 1.0);
    state.adam_m.push_back(LayerParams::zeros_like(p));
    state.adam_v.push_back(LayerParams::zeros_like(p));
    state.layers.push_back(std::move(p));
    state.batchnorm.push_back({Vector(out, 0.0), Vector(out, 1.0)});
    in = out;
  }
  return state;
}

ForwardResult forward(NetworkState& state, const Matrix& batch, Mode mode, Rng& rng) {
  if (mode == Mode::kEval) return run_forward(state, batch, mode, nullptr, nullptr);
  return run_forward(state, batch, mode, &rng, &state.batchnorm);
}

Matrix infer(const NetworkState& state, const Matrix& batch) {
  return run_forward(state, batch, Mode::kEval, nullptr, nullptr).features;
}

NetworkGradients backward(const NetworkState& state, const ForwardTrace& trace,
                          const Matrix& upstream_grad) {
  return backward(state, trace, upstream_grad, nullptr);
}

NetworkGradients backward(const NetworkState& state, const ForwardTrace& trace,
                          const Matrix& upstream_grad, Matrix* input_grad) {
  if (trace.layers.size() != state.layers.size()) {
    throw DimensionError("backward: trace has " + std::to_string(trace.layers.size()) +
                         " layers, network has " + std::to_string(state.layers.size()));
  }
  const NetworkConfig& cfg = state.config;
  NetworkGradients grads;
  grads.reserve(state.layers.size());
  for (const auto& p : state.layers) grads.push_back(LayerParams::zeros_like(p));

  Matrix d_out = upstream_grad;
  for (std::size_t l = state.layers.size(); l-- > 0;) {
    const LayerParams& p = state.layers[l];
    const LayerTrace& t = trace.layers[l];
    LayerParams& g = grads[l];
    const std::size_t width = p.weight.rows();
    const std::size_t n = t.activation.rows();
    if (t.input.cols() != p.weight.cols() || t.activation.cols() != width ||
        d_out.rows() != n || d_out.cols() != width) {
      throw DimensionError("backward: trace does not match network layer " + std::to_string(l));
    }

    // Through dropout and tanh.
    Matrix dz(n, width);
    for (std::size_t idx = 0; idx < dz.size(); ++idx) {
      double d = d_out.flat()[idx];
      if (!t.mask.empty()) d *= t.mask.flat()[idx];
      const double a = t.activation.flat()[idx];
      dz.flat()[idx] = d * (1.0 - a * a);
    }

    Matrix da;
    if (cfg.batchnorm_enabled) {
      Vector sum_dxhat(width, 0.0);
      Vector sum_dxhat_xhat(width, 0.0);
      Matrix dxhat(n, width);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < width; ++o) {
          const double xhat = t.normalized(i, o);
          g.gamma[o] += dz(i, o) * xhat;
          g.beta[o] += dz(i, o);
          const double dx = dz(i, o) * p.gamma[o];
          dxhat(i, o) = dx;
          sum_dxhat[o] += dx;
          sum_dxhat_xhat[o] += dx * xhat;
        }
      }
      da = Matrix(n, width);
      if (trace.mode == Mode::kTrain) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t o = 0; o < width; ++o) {
            da(i, o) = t.inv_std[o] * inv_n *
                       (static_cast<double>(n) * dxhat(i, o) - sum_dxhat[o] -
                        t.normalized(i, o) * sum_dxhat_xhat[o]);
          }
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t o = 0; o < width; ++o) da(i, o) = dxhat(i, o) * t.inv_std[o];
        }
      }
    } else {
      da = std::move(dz);
    }

    for (std::size_t i = 0; i < n; ++i) {
      auto xi = t.input.row(i);
      for (std::size_t o = 0; o < width; ++o) {
        const double d = da(i, o);
        g.bias[o] += d;
        kernels::axpy(d, xi, g.weight.row(o));
      }
    }

    if (l > 0 || input_grad != nullptr) {
      Matrix d_in(n, p.weight.cols());
      for (std::size_t i = 0; i < n; ++i) {
        auto row = d_in.row(i);
        for (std::size_t o = 0; o < width; ++o) kernels::axpy(da(i, o), p.weight.row(o), row);
      }
      d_out = std::move(d_in);
    }
  }
  if (input_grad != nullptr) *input_grad = std::move(d_out);
  return grads;
}

bool all_finite(std::span<const double> values) noexcept {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

kernels::AdamCoefficients adam_coefficients(const AdamSettings& settings, double learning_rate,
                                            std::uint64_t step) {
  kernels::AdamCoefficients c;
  c.learning_rate = learning_rate;
  c.beta1 = settings.beta1;
  c.beta2 = settings.beta2;
  c.epsilon = settings.epsilon;
  c.bias_correction1 = 1.0 - std::pow(settings.beta1, static_cast<double>(step));
  c.bias_correction2 = 1.0 - std::pow(settings.beta2, static_cast<double>(step));
  return c;
}

void adam_step(NetworkState& state, const NetworkGradients& gradients, double learning_rate,
               const AdamSettings& settings) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("adam_step: learning rate must be positive and finite");
  }
  if (gradients.size() != state.layers.size()) {
    throw DimensionError("adam_step: gradient layer count does not match network");
  }
  for (std::size_t l = 0; l < gradients.size(); ++l) {
    if (!gradients[l].same_shape(state.layers[l])) {
      throw DimensionError("adam_step: gradient shape mismatch at layer " + std::to_string(l));
    }
    bool finite = true;
    for_each_block(gradients[l], [&](std::span<const double> b) { finite = finite && all_finite(b); });
    if (!finite) {
      throw TrainingError("adam_step: non-finite gradient in layer " + std::to_string(l));
    }
  }
  const auto coeffs = adam_coefficients(settings, learning_rate, state.step_count + 1);
  for (std::size_t l = 0; l < gradients.size(); ++l) {
    std::vector<std::span<const double>> g;
    std::vector<std::span<double>> value, m, v;
    for_each_block(gradients[l], [&](std::span<const double> b) { g.push_back(b); });
    for_each_block(state.layers[l], [&](std::span<double> b) { value.push_back(b); });
    for_each_block(state.adam_m[l], [&](std::span<double> b) { m.push_back(b); });
    for_each_block(state.adam_v[l], [&](std::span<double> b) { v.push_back(b); });
    for (std::size_t b = 0; b < g.size(); ++b) kernels::adam(coeffs, g[b], value[b], m[b], v[b]);
  }
  ++state.step_count;
}

}  // namespace cecmmr
