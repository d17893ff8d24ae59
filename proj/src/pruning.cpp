#include "cecmmr/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "cecmmr/errors.hpp"

namespace cecmmr {

void PruningConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    throw ConfigError("pruning: epsilon must lie in [0, 1)");
  }
}

ClusterAssignment prune_assign(std::span<const MixtureParams> params, const PruningConfig& config,
                               std::span<const std::size_t> allowed) {
  config.validate();
  ClusterAssignment out;
  out.points = params.size();
  out.components = params.empty() ? 0 : params.front().size();
  const std::size_t k = out.components;
  out.activation.assign(out.points * k, 0);
  out.pruned_weights = Matrix(out.points, k);

  std::vector<bool> permitted(k, allowed.empty());
  for (std::size_t c : allowed) {
    if (c >= k) throw DimensionError("prune_assign: allowed component index out of range");
    permitted[c] = true;
  }

  std::vector<bool> ever_active(k, false);
  for (std::size_t j = 0; j < out.points; ++j) {
    const Vector& w = params[j].weights;
    if (w.size() != k) throw DimensionError("prune_assign: inconsistent component counts");
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const bool above = w[i] > config.epsilon;
      const bool on = permitted[i] &&
                      (config.rule == ActivationRule::kWeightAboveEpsilon ? above : !above);
      if (on) {
        out.activation[j * k + i] = 1;
        out.pruned_weights(j, i) = w[i];
        total += w[i];
      }
    }
    if (total > 0.0) {
      for (std::size_t i = 0; i < k; ++i) out.pruned_weights(j, i) /= total;
    } else {
      // Nothing survived: keep the heaviest permitted component.
      std::size_t best = k;
      for (std::size_t i = 0; i < k; ++i) {
        if (permitted[i] && (best == k || w[i] > w[best])) best = i;
      }
      if (best == k) throw ConfigError("prune_assign: no permitted components");
      for (std::size_t i = 0; i < k; ++i) {
        out.activation[j * k + i] = 0;
        out.pruned_weights(j, i) = 0.0;
      }
      out.activation[j * k + best] = 1;
      out.pruned_weights(j, best) = 1.0;
      out.degenerate_rows.push_back(j);
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (out.activation[j * k + i]) ever_active[i] = true;
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (ever_active[i]) out.active_set.push_back(i);
  }
  return out;
}

ActiveComponents active_components(const ClusterAssignment& assignment) {
  ActiveComponents out;
  std::vector<bool> seen(assignment.components, false);
  for (std::size_t j = 0; j < assignment.points; ++j) {
    for (std::size_t i = 0; i < assignment.components; ++i) {
      if (assignment.active(j, i)) seen[i] = true;
    }
  }
  for (std::size_t i = 0; i < assignment.components; ++i) {
    if (seen[i]) out.indices.push_back(i);
  }
  out.count = out.indices.size();
  return out;
}

std::vector<MixtureParams> apply_assignment(std::span<const MixtureParams> params,
                                            const ClusterAssignment& assignment) {
  if (params.size() != assignment.points) {
    throw DimensionError("apply_assignment: point count mismatch");
  }
  std::vector<MixtureParams> out(params.begin(), params.end());
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (out[j].size() != assignment.components) {
      throw DimensionError("apply_assignment: component count mismatch");
    }
    auto row = assignment.pruned_weights.row(j);
    std::copy(row.begin(), row.end(), out[j].weights.begin());
  }
  return out;
}

std::size_t assign_point(const MixtureParams& params, double y,
                         std::span<const std::size_t> active) {
  const std::size_t k = params.size();
  if (k == 0) throw DimensionError("assign_point: empty mixture");
  auto score = [&](std::size_t i) {
    return std::log(params.weights[i]) + gaussian_log_pdf(y, params.means[i], params.sigmas[i]);
  };
  std::size_t best = k;
  double best_score = -std::numeric_limits<double>::infinity();
  auto consider = [&](std::size_t i) {
    const double s = score(i);
    if (best == k || s > best_score) {
      best = i;
      best_score = s;
    }
  };
  if (active.empty()) {
    for (std::size_t i = 0; i < k; ++i) consider(i);
  } else {
    std::vector<std::size_t> sorted(active.begin(), active.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i : sorted) {
      if (i >= k) throw DimensionError("assign_point: active index out of range");
      consider(i);
    }
  }
  return best;
}

void write_assignment_csv(std::ostream& out, const ClusterAssignment& assignment,
                          std::span<const MixtureParams> params, std::span<const double> targets) {
  const std::size_t k = assignment.components;
  out << "point";
  for (std::size_t i = 0; i < k; ++i) out << ",active_" << i;
  for (std::size_t i = 0; i < k; ++i) out << ",weight_" << i;
  out << ",assigned\n";
  const auto previous = out.precision(17);
  for (std::size_t j = 0; j < assignment.points; ++j) {
    out << j;
    for (std::size_t i = 0; i < k; ++i) out << ',' << int(assignment.active(j, i));
    for (std::size_t i = 0; i < k; ++i) out << ',' << assignment.pruned_weights(j, i);
    std::size_t assigned = 0;
    if (!targets.empty()) {
      MixtureParams pruned = params[j];
      auto row = assignment.pruned_weights.row(j);
      std::copy(row.begin(), row.end(), pruned.weights.begin());
      std::vector<std::size_t> active;
      for (std::size_t i = 0; i < k; ++i) {
        if (assignment.active(j, i)) active.push_back(i);
      }
      assigned = assign_point(pruned, targets[j], active);
    } else {
      auto row = assignment.pruned_weights.row(j);
      assigned = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    out << ',' << assigned << '\n';
  }
  out.precision(previous);
}

}  // namespace cecmmr
