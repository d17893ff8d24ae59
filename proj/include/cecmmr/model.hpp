#pragma once

#include <cstddef>
#include <vector>

#include "cecmmr/mixture.hpp"
#include "cecmmr/network.hpp"

namespace cecmmr {

/// Hidden stack plus mixture head.
struct Model {
  NetworkState network;
  HeadState head;

  std::size_t components() const noexcept { return head.components; }
  std::size_t input_dim() const noexcept { return network.config.input_dim; }
  friend bool operator==(const Model&, const Model&) = default;
};

struct ModelTrace {
  ForwardTrace network;
  HeadTrace head;
};

struct ModelForward {
  std::vector<MixtureParams> params;
  ModelTrace trace;
};

struct ModelGradients {
  NetworkGradients network;
  HeadGradients head;
};

/// Head weights are seeded from a value derived from `config.seed`.
Model init_model(const NetworkConfig& config, std::size_t components, const SigmaBounds& sigma);

ModelForward forward(Model& model, const Matrix& inputs, Mode mode, Rng& rng);

/// Eval-mode prediction; leaves the model untouched.
std::vector<MixtureParams> predict(const Model& model, const Matrix& inputs);

void adam_step(Model& model, const ModelGradients& gradients, double learning_rate,
               const AdamSettings& settings = {});

}  // namespace cecmmr
