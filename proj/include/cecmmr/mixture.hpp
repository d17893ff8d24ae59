#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cecmmr/matrix.hpp"
#include "cecmmr/network.hpp"

namespace cecmmr {

/// Univariate Gaussian mixture for one input, in standardized target units.
struct MixtureParams {
  Vector weights;  // on the simplex
  Vector means;
  Vector sigmas;  // in (sigma_min, sigma_max]

  std::size_t size() const noexcept { return weights.size(); }
  friend bool operator==(const MixtureParams&, const MixtureParams&) = default;
};

struct SigmaBounds {
  double min = 1e-3;
  double max = 1.0;
  void validate() const;
  friend bool operator==(const SigmaBounds&, const SigmaBounds&) = default;
};

/// Output layer producing the mixture. The three heads are stored fused in one
/// (3k x width) affine map: rows [0, k) are weight logits, [k, 2k) means and
/// [2k, 3k) sigma pre-activations.
struct HeadState {
  std::size_t components = 0;
  std::size_t feature_width = 0;
  SigmaBounds sigma;
  Matrix weight;
  Vector bias;
  Matrix adam_m_weight;
  Matrix adam_v_weight;
  Vector adam_m_bias;
  Vector adam_v_bias;
  std::uint64_t step_count = 0;

  std::size_t logit_row(std::size_t i) const noexcept { return i; }
  std::size_t mean_row(std::size_t i) const noexcept { return components + i; }
  std::size_t sigma_row(std::size_t i) const noexcept { return 2 * components + i; }
  friend bool operator==(const HeadState&, const HeadState&) = default;
};

struct HeadGradients {
  Matrix weight;
  Vector bias;
};

struct HeadTrace {
  Matrix features;  // n x width
  Matrix outputs;   // n x 3k raw pre-activations
};

struct HeadOutput {
  std::vector<MixtureParams> params;
  HeadTrace trace;
};

HeadState init_head(std::size_t feature_width, std::size_t components, const SigmaBounds& sigma,
                    std::uint64_t seed);

/// softmax weights, linear means, sigma = min + (max - min) * sigmoid(s).
HeadOutput predict_mixture(const HeadState& head, const Matrix& features);

/// Mixture parameters from raw head outputs for one sample.
MixtureParams mixture_from_outputs(const HeadState& head, std::span<const double> outputs);

/// Backpropagates d loss / d raw outputs (n x 3k) into the head parameters and
/// writes d loss / d features into `feature_grad`.
HeadGradients head_backward(const HeadState& head, const HeadTrace& trace,
                            const Matrix& output_grad, Matrix& feature_grad);

void adam_step(HeadState& head, const HeadGradients& gradients, double learning_rate,
               const AdamSettings& settings = {});

double gaussian_pdf(double y, double mean, double sigma);
double gaussian_log_pdf(double y, double mean, double sigma);

/// sum_i p_i N(mu_i, sigma_i)(y)
double gmm_density(const MixtureParams& params, double y);
/// log-sum-exp of log p_i + log N_i(y)
double gmm_log_density(const MixtureParams& params, double y);

struct ComponentScore {
  double value = 0.0;
  std::size_t component = 0;  // lowest index on ties
};

/// max_i p_i N(mu_i, sigma_i)(y). Not a density: it integrates to at most 1.
ComponentScore cec_score(const MixtureParams& params, double y);
/// max_i (log p_i + log N_i(y)); components with zero weight score -inf.
ComponentScore cec_log_score(const MixtureParams& params, double y);

/// Checks the simplex and sigma-range invariants.
bool is_valid_mixture(const MixtureParams& params, const SigmaBounds& sigma,
                      double weight_tolerance = 1e-9);

}  // namespace cecmmr
