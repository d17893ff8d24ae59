#include "cecmmr/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cecmmr/errors.hpp"

namespace cecmmr {
namespace {

void check_batch(std::span<const MixtureParams> params, std::span<const double> targets) {
  if (params.empty()) throw DataError(DataError::Reason::kEmpty, "objective: empty batch");
  if (params.size() != targets.size()) {
    throw DimensionError("objective: " + std::to_string(params.size()) + " mixtures but " +
                         std::to_string(targets.size()) + " targets");
  }
}

double negated_mean(const Vector& terms) {
  double sum = 0.0;
  for (double t : terms) sum += t;
  return -(sum / static_cast<double>(terms.size()));
}

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

}  // namespace

std::string_view to_string(LossKind kind) noexcept {
  return kind == LossKind::kGmm ? "gmm" : "cec";
}

std::string_view to_string(LossDomain domain) noexcept {
  return domain == LossDomain::kLog ? "log" : "literal";
}

LossKind parse_loss_kind(std::string_view text) {
  if (text == "gmm" || text == "mdn") return LossKind::kGmm;
  if (text == "cec") return LossKind::kCec;
  throw ConfigError("unknown loss kind '" + std::string(text) + "' (expected cec or gmm)");
}

LossDomain parse_loss_domain(std::string_view text) {
  if (text == "log") return LossDomain::kLog;
  if (text == "literal") return LossDomain::kLiteral;
  throw ConfigError("unknown loss domain '" + std::string(text) + "' (expected log or literal)");
}

BatchLoss gmm_objective(std::span<const MixtureParams> params, std::span<const double> targets,
                        LossDomain domain) {
  check_batch(params, targets);
  BatchLoss loss;
  loss.config = {LossKind::kGmm, domain};
  loss.per_sample_terms.resize(params.size());
  for (std::size_t j = 0; j < params.size(); ++j) {
    loss.per_sample_terms[j] = domain == LossDomain::kLog ? gmm_log_density(params[j], targets[j])
                                                          : gmm_density(params[j], targets[j]);
  }
  loss.value = negated_mean(loss.per_sample_terms);
  return loss;
}

BatchLoss cec_objective(std::span<const MixtureParams> params, std::span<const double> targets,
                        LossDomain domain) {
  check_batch(params, targets);
  BatchLoss loss;
  loss.config = {LossKind::kCec, domain};
  loss.per_sample_terms.resize(params.size());
  loss.argmax_indices.resize(params.size());
  for (std::size_t j = 0; j < params.size(); ++j) {
    const ComponentScore s = domain == LossDomain::kLog ? cec_log_score(params[j], targets[j])
                                                        : cec_score(params[j], targets[j]);
    loss.per_sample_terms[j] = s.value;
    loss.argmax_indices[j] = s.component;
  }
  loss.value = negated_mean(loss.per_sample_terms);
  return loss;
}

BatchLoss compute_loss(const LossConfig& config, std::span<const MixtureParams> params,
                       std::span<const double> targets) {
  return config.kind == LossKind::kGmm ? gmm_objective(params, targets, config.domain)
                                       : cec_objective(params, targets, config.domain);
}

Matrix loss_output_gradient(const BatchLoss& loss, std::span<const MixtureParams> params,
                            std::span<const double> targets, const HeadState& head,
                            const HeadTrace& trace) {
  check_batch(params, targets);
  const std::size_t n = params.size();
  const std::size_t k = head.components;
  if (trace.outputs.rows() != n || trace.outputs.cols() != 3 * k ||
      loss.per_sample_terms.size() != n) {
    throw DimensionError("loss_output_gradient: trace or loss does not match the batch");
  }
  const bool cec = loss.config.kind == LossKind::kCec;
  if (cec && loss.argmax_indices.size() != n) {
    throw DimensionError("loss_output_gradient: missing argmax indices");
  }

  Matrix grad(n, 3 * k);
  Vector log_terms(k);
  Vector resp(k);
  const double sigma_span = head.sigma.max - head.sigma.min;
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t j = 0; j < n; ++j) {
    const MixtureParams& p = params[j];
    if (p.size() != k) throw DimensionError("loss_output_gradient: component count mismatch");
    const double y = targets[j];
    // d(-term_j)/d(theta) for the literal form is term_j times the log-form gradient.
    const double scale =
        loss.config.domain == LossDomain::kLog ? inv_n : loss.per_sample_terms[j] * inv_n;

    if (cec) {
      std::fill(resp.begin(), resp.end(), 0.0);
      resp[loss.argmax_indices[j]] = 1.0;
    } else {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < k; ++i) {
        log_terms[i] = std::log(p.weights[i]) + gaussian_log_pdf(y, p.means[i], p.sigmas[i]);
        best = std::max(best, log_terms[i]);
      }
      double sum = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        resp[i] = std::exp(log_terms[i] - best);
        sum += resp[i];
      }
      for (double& r : resp) r /= sum;
    }

    auto out = trace.outputs.row(j);
    for (std::size_t i = 0; i < k; ++i) {
      grad(j, head.logit_row(i)) = scale * (p.weights[i] - resp[i]);
      if (resp[i] == 0.0) continue;
      const double diff = y - p.means[i];
      const double sigma = p.sigmas[i];
      const double inv_var = 1.0 / (sigma * sigma);
      grad(j, head.mean_row(i)) = -scale * resp[i] * diff * inv_var;
      const double d_sigma = -scale * resp[i] * (diff * diff * inv_var / sigma - 1.0 / sigma);
      const double s = sigmoid(out[head.sigma_row(i)]);
      grad(j, head.sigma_row(i)) = d_sigma * sigma_span * s * (1.0 - s);
    }
  }
  return grad;
}

ModelGradients loss_backward(const BatchLoss& loss, std::span<const MixtureParams> params,
                             std::span<const double> targets, const Model& model,
                             const ModelTrace& trace) {
  const Matrix out_grad = loss_output_gradient(loss, params, targets, model.head, trace.head);
  Matrix feature_grad;
  ModelGradients g;
  g.head = head_backward(model.head, trace.head, out_grad, feature_grad);
  g.network = backward(model.network, trace.network, feature_grad);
  return g;
}

}  // namespace cecmmr
