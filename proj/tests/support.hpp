#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "cecmmr/model.hpp"
#include "cecmmr/objectives.hpp"

namespace testsupport {

using namespace cecmmr;

/// Random mixture with k components; weights on the simplex, sigma in (0.05, 1].
inline MixtureParams random_mixture(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  MixtureParams p;
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = -std::log(1.0 - u(rng));  // Dirichlet(1) via exponentials
    p.weights.push_back(w);
    total += w;
    p.means.push_back(n(rng));
    p.sigmas.push_back(0.05 + 0.95 * u(rng));
  }
  for (double& w : p.weights) w /= total;
  return p;
}

inline std::vector<std::span<double>> parameter_views(Model& m) {
  std::vector<std::span<double>> out;
  for (auto& l : m.network.layers) {
    out.push_back(l.weight.flat());
    out.push_back(l.bias);
    out.push_back(l.gamma);
    out.push_back(l.beta);
  }
  out.push_back(m.head.weight.flat());
  out.push_back(m.head.bias);
  return out;
}

inline std::vector<std::span<const double>> gradient_views(const ModelGradients& g) {
  std::vector<std::span<const double>> out;
  for (const auto& l : g.network) {
    out.push_back(l.weight.flat());
    out.push_back(l.bias);
    out.push_back(l.gamma);
    out.push_back(l.beta);
  }
  out.push_back(g.head.weight.flat());
  out.push_back(g.head.bias);
  return out;
}

/// Train-mode loss for a copy of `model`, so batch norm uses batch statistics.
inline double train_mode_loss(Model model, const Matrix& x, const Vector& y, const LossConfig& cfg) {
  Rng rng(0);
  const auto fw = forward(model, x, Mode::kTrain, rng);
  return compute_loss(cfg, fw.params, y).value;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps parameters
/// whose true gradient is ~0 from dividing rounding noise by nothing.
inline double relative_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences with step h for every trainable parameter.
inline GradCheck check_gradients(const Model& model, const Matrix& x, const Vector& y,
                                 const LossConfig& cfg, double h = 1e-5) {
  Model work = model;
  Rng rng(0);
  const auto fw = forward(work, x, Mode::kTrain, rng);
  const BatchLoss loss = compute_loss(cfg, fw.params, y);
  const ModelGradients grads = loss_backward(loss, fw.params, y, model, fw.trace);
  const auto analytic = gradient_views(grads);

  GradCheck result;
  Model probe = model;
  auto params = parameter_views(probe);
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double saved = params[t][i];
      params[t][i] = saved + h;
      const double up = train_mode_loss(probe, x, y, cfg);
      params[t][i] = saved - h;
      const double down = train_mode_loss(probe, x, y, cfg);
      params[t][i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic[t][i], numeric));
      ++result.checked;
    }
  }
  return result;
}

}  // namespace testsupport
