#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "cecmmr/kernels.hpp"
#include "cecmmr/matrix.hpp"
#include "cecmmr/rng.hpp"

namespace cecmmr {

enum class Mode { kTrain, kEval };

struct NetworkConfig {
  std::size_t input_dim = 1;
  std::size_t hidden_layers = 2;
  std::size_t hidden_width = 32;  // same width for every hidden layer
  double dropout_rate = 0.2;
  bool batchnorm_enabled = true;
  std::uint64_t seed = 0;
  double batchnorm_momentum = 0.9;  // running <- momentum * running + (1 - momentum) * batch
  double batchnorm_epsilon = 1e-5;

  void validate() const;
  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Trainable parameters of one hidden layer. The same shape is reused for
/// gradients and for the Adam moment accumulators.
struct LayerParams {
  Matrix weight;  // width_out x width_in
  Vector bias;
  Vector gamma;  // batch-norm scale
  Vector beta;   // batch-norm shift

  static LayerParams zeros_like(const LayerParams& other);
  bool same_shape(const LayerParams& other) const noexcept;
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct BatchNormRunning {
  Vector mean;
  Vector var;  // strictly positive
  friend bool operator==(const BatchNormRunning&, const BatchNormRunning&) = default;
};

using NetworkGradients = std::vector<LayerParams>;

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

struct NetworkState {
  NetworkConfig config;
  std::vector<LayerParams> layers;
  std::vector<LayerParams> adam_m;
  std::vector<LayerParams> adam_v;
  std::vector<BatchNormRunning> batchnorm;
  std::uint64_t step_count = 0;

  std::size_t output_width() const noexcept { return config.hidden_width; }
  friend bool operator==(const NetworkState&, const NetworkState&) = default;
};

struct LayerTrace {
  Matrix input;       // n x width_in
  Matrix normalized;  // x-hat when batch norm is on, otherwise the affine output
  Vector inv_std;     // 1 / sqrt(var_batch + eps), batch norm only
  Matrix activation;  // tanh output before dropout
  Matrix mask;        // dropout multipliers (0 or 1/(1-rate)); empty when no dropout
};

struct ForwardTrace {
  Mode mode = Mode::kEval;
  std::vector<LayerTrace> layers;
};

struct ForwardResult {
  Matrix features;  // n x hidden_width
  ForwardTrace trace;
};

/// Glorot-uniform weights from `config.seed`, zero biases, unit batch-norm scale.
NetworkState init_network(const NetworkConfig& config);

/// Hidden stack: affine -> batch norm -> tanh -> dropout for every layer.
/// Train mode normalizes with batch statistics, updates the running statistics
/// and draws dropout masks from `rng`. Eval mode uses running statistics and
/// leaves both the state and `rng` untouched.
ForwardResult forward(NetworkState& state, const Matrix& batch, Mode mode, Rng& rng);

/// Eval-mode forward on a const state.
Matrix infer(const NetworkState& state, const Matrix& batch);

/// Gradients of a scalar loss with respect to every trainable parameter, given
/// d loss / d features for the batch that produced `trace`.
NetworkGradients backward(const NetworkState& state, const ForwardTrace& trace,
                          const Matrix& upstream_grad);

/// Same as backward() but also returns d loss / d input batch.
NetworkGradients backward(const NetworkState& state, const ForwardTrace& trace,
                          const Matrix& upstream_grad, Matrix* input_grad);

/// One Adam step over all layer parameters; throws TrainingError on non-finite gradients.
void adam_step(NetworkState& state, const NetworkGradients& gradients, double learning_rate,
               const AdamSettings& settings = {});

/// Coefficients for step number `step` (1-based).
kernels::AdamCoefficients adam_coefficients(const AdamSettings& settings, double learning_rate,
                                            std::uint64_t step);

bool all_finite(std::span<const double> values) noexcept;

}  // namespace cecmmr
