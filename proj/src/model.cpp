#include "cecmmr/model.hpp"

#include "cecmmr/errors.hpp"

namespace cecmmr {

Model init_model(const NetworkConfig& config, std::size_t components, const SigmaBounds& sigma) {
  Model model;
  model.network = init_network(config);
  model.head = init_head(config.hidden_width, components, sigma,
                         config.seed ^ 0x9e3779b97f4a7c15ULL);
  return model;
}

ModelForward forward(Model& model, const Matrix& inputs, Mode mode, Rng& rng) {
  ForwardResult net = forward(model.network, inputs, mode, rng);
  HeadOutput head = predict_mixture(model.head, net.features);
  return {std::move(head.params), {std::move(net.trace), std::move(head.trace)}};
}

std::vector<MixtureParams> predict(const Model& model, const Matrix& inputs) {
  return predict_mixture(model.head, infer(model.network, inputs)).params;
}

void adam_step(Model& model, const ModelGradients& gradients, double learning_rate,
               const AdamSettings& settings) {
  // Validate both halves before mutating either.
  if (!all_finite(gradients.head.weight.flat()) || !all_finite(gradients.head.bias)) {
    throw TrainingError("adam_step: non-finite gradient in mixture head");
  }
  for (const auto& layer : gradients.network) {
    if (!all_finite(layer.weight.flat()) || !all_finite(layer.bias) ||
        !all_finite(layer.gamma) || !all_finite(layer.beta)) {
      throw TrainingError("adam_step: non-finite gradient in hidden layers");
    }
  }
  adam_step(model.network, gradients.network, learning_rate, settings);
  adam_step(model.head, gradients.head, learning_rate, settings);
}

}  // namespace cecmmr
