#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "cecmmr/mixture.hpp"
#include "cecmmr/model.hpp"

namespace cecmmr {

/// kGmm sums the weighted components (classical MDN); kCec keeps only the best one.
enum class LossKind { kGmm, kCec };

/// kLog trains on per-sample log terms (negative log-likelihood style);
/// kLiteral averages the raw densities / scores themselves.
enum class LossDomain { kLog, kLiteral };

struct LossConfig {
  LossKind kind = LossKind::kCec;
  LossDomain domain = LossDomain::kLog;
  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

std::string_view to_string(LossKind kind) noexcept;
std::string_view to_string(LossDomain domain) noexcept;
LossKind parse_loss_kind(std::string_view text);
LossDomain parse_loss_domain(std::string_view text);

struct BatchLoss {
  LossConfig config;
  double value = 0.0;  // -mean(per_sample_terms)
  Vector per_sample_terms;
  std::vector<std::size_t> argmax_indices;  // filled for kCec only
};

BatchLoss gmm_objective(std::span<const MixtureParams> params, std::span<const double> targets,
                        LossDomain domain = LossDomain::kLog);
BatchLoss cec_objective(std::span<const MixtureParams> params, std::span<const double> targets,
                        LossDomain domain = LossDomain::kLog);
BatchLoss compute_loss(const LossConfig& config, std::span<const MixtureParams> params,
                       std::span<const double> targets);

/// d loss.value / d raw head outputs (n x 3k). Under kCec only the winning
/// component's mean and sigma rows are non-zero for each sample.
Matrix loss_output_gradient(const BatchLoss& loss, std::span<const MixtureParams> params,
                            std::span<const double> targets, const HeadState& head,
                            const HeadTrace& trace);

/// Exact gradient of loss.value with respect to every model parameter.
ModelGradients loss_backward(const BatchLoss& loss, std::span<const MixtureParams> params,
                             std::span<const double> targets, const Model& model,
                             const ModelTrace& trace);

}  // namespace cecmmr
