#include "cecmmr/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "cecmmr/errors.hpp"

namespace cecmmr {
namespace {

constexpr double kLogSqrtTwoPi = 0.91893853320467274178;  // 0.5 * log(2 pi)

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

}  // namespace

void SigmaBounds::validate() const {
  if (!(min > 0.0) || !(max > min) || !std::isfinite(max)) {
    throw ConfigError("sigma bounds must satisfy 0 < min < max < inf");
  }
}

HeadState init_head(std::size_t feature_width, std::size_t components, const SigmaBounds& sigma,
                    std::uint64_t seed) {
  if (feature_width == 0 || components == 0) {
    throw ConfigError("mixture head: feature width and component count must be positive");
  }
  sigma.validate();
  HeadState head;
  head.components = components;
  head.feature_width = feature_width;
  head.sigma = sigma;
  head.weight = Matrix(3 * components, feature_width);
  head.bias.assign(3 * components, 0.0);
  head.adam_m_weight = Matrix(3 * components, feature_width);
  head.adam_v_weight = Matrix(3 * components, feature_width);
  head.adam_m_bias.assign(3 * components, 0.0);
  head.adam_v_bias.assign(3 * components, 0.0);

  Rng rng(seed);
  const double bound =
      std::sqrt(6.0 / static_cast<double>(feature_width + components));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : head.weight.flat()) w = dist(rng);
  // Means start at evenly spaced standard-normal quantiles of the target.
  const boost::math::normal_distribution<double> unit;
  for (std::size_t i = 0; i < components; ++i) {
    const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(components);
    head.bias[head.mean_row(i)] = boost::math::quantile(unit, q);
  }
  return head;
}

MixtureParams mixture_from_outputs(const HeadState& head, std::span<const double> out) {
  const std::size_t k = head.components;
  MixtureParams p;
  p.weights.resize(k);
  p.means.resize(k);
  p.sigmas.resize(k);

  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) max_logit = std::max(max_logit, out[head.logit_row(i)]);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    p.weights[i] = std::exp(out[head.logit_row(i)] - max_logit);
    total += p.weights[i];
  }
  for (double& w : p.weights) w /= total;

  const double span = head.sigma.max - head.sigma.min;
  const double floor = std::nextafter(head.sigma.min, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < k; ++i) {
    p.means[i] = out[head.mean_row(i)];
    p.sigmas[i] = std::max(floor, head.sigma.min + span * sigmoid(out[head.sigma_row(i)]));
  }
  return p;
}

HeadOutput predict_mixture(const HeadState& head, const Matrix& features) {
  if (features.cols() != head.feature_width) {
    throw DimensionError("predict_mixture: feature width " + std::to_string(features.cols()) +
                         " does not match head width " + std::to_string(head.feature_width));
  }
  if (!all_finite(features.flat())) throw TrainingError("predict_mixture: non-finite features");

  HeadOutput result;
  const std::size_t n = features.rows();
  result.trace.outputs = Matrix(n, 3 * head.components);
  for (std::size_t i = 0; i < n; ++i) {
    auto f = features.row(i);
    for (std::size_t r = 0; r < head.weight.rows(); ++r) {
      result.trace.outputs(i, r) = kernels::dot(f, head.weight.row(r)) + head.bias[r];
    }
  }
  result.params.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    result.params.push_back(mixture_from_outputs(head, result.trace.outputs.row(i)));
  }
  result.trace.features = features;
  return result;
}

HeadGradients head_backward(const HeadState& head, const HeadTrace& trace,
                            const Matrix& output_grad, Matrix& feature_grad) {
  const std::size_t n = trace.features.rows();
  const std::size_t rows = head.weight.rows();
  if (output_grad.rows() != n || output_grad.cols() != rows ||
      trace.features.cols() != head.feature_width) {
    throw DimensionError("head_backward: trace does not match head");
  }
  HeadGradients g{Matrix(rows, head.feature_width), Vector(rows, 0.0)};
  feature_grad = Matrix(n, head.feature_width);
  for (std::size_t i = 0; i < n; ++i) {
    auto f = trace.features.row(i);
    auto df = feature_grad.row(i);
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = output_grad(i, r);
      if (d == 0.0) continue;
      g.bias[r] += d;
      kernels::axpy(d, f, g.weight.row(r));
      kernels::axpy(d, head.weight.row(r), df);
    }
  }
  return g;
}

void adam_step(HeadState& head, const HeadGradients& gradients, double learning_rate,
               const AdamSettings& settings) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("adam_step: learning rate must be positive and finite");
  }
  if (!gradients.weight.same_shape(head.weight) || gradients.bias.size() != head.bias.size()) {
    throw DimensionError("adam_step: head gradient shape mismatch");
  }
  if (!all_finite(gradients.weight.flat()) || !all_finite(gradients.bias)) {
    throw TrainingError("adam_step: non-finite gradient in mixture head");
  }
  const auto c = adam_coefficients(settings, learning_rate, head.step_count + 1);
  kernels::adam(c, gradients.weight.flat(), head.weight.flat(), head.adam_m_weight.flat(),
                head.adam_v_weight.flat());
  kernels::adam(c, gradients.bias, head.bias, head.adam_m_bias, head.adam_v_bias);
  ++head.step_count;
}

double gaussian_pdf(double y, double mean, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("gaussian_pdf: sigma must be positive");
  const double z = (y - mean) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

double gaussian_log_pdf(double y, double mean, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("gaussian_log_pdf: sigma must be positive");
  const double z = (y - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrtTwoPi;
}

double gmm_density(const MixtureParams& params, double y) {
  double sum = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    sum += params.weights[i] * gaussian_pdf(y, params.means[i], params.sigmas[i]);
  }
  return sum;
}

double gmm_log_density(const MixtureParams& params, double y) {
  const std::size_t k = params.size();
  Vector terms(k);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    terms[i] = std::log(params.weights[i]) + gaussian_log_pdf(y, params.means[i], params.sigmas[i]);
    best = std::max(best, terms[i]);
  }
  if (!std::isfinite(best)) return best;
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - best);
  return best + std::log(sum);
}

ComponentScore cec_score(const MixtureParams& params, double y) {
  ComponentScore best{-1.0, 0};
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double v = params.weights[i] * gaussian_pdf(y, params.means[i], params.sigmas[i]);
    if (v > best.value) best = {v, i};
  }
  return best;
}

ComponentScore cec_log_score(const MixtureParams& params, double y) {
  ComponentScore best{-std::numeric_limits<double>::infinity(), 0};
  bool found = false;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double v =
        std::log(params.weights[i]) + gaussian_log_pdf(y, params.means[i], params.sigmas[i]);
    if (!found || v > best.value) {
      best = {v, i};
      found = true;
    }
  }
  return best;
}

bool is_valid_mixture(const MixtureParams& params, const SigmaBounds& sigma,
                      double weight_tolerance) {
  const std::size_t k = params.weights.size();
  if (k == 0 || params.means.size() != k || params.sigmas.size() != k) return false;
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!(params.weights[i] >= 0.0)) return false;
    if (!(params.sigmas[i] > sigma.min && params.sigmas[i] <= sigma.max)) return false;
    if (!std::isfinite(params.means[i])) return false;
    total += params.weights[i];
  }
  return std::abs(total - 1.0) <= weight_tolerance;
}

}  // namespace cecmmr
