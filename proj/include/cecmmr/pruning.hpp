#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "cecmmr/matrix.hpp"
#include "cecmmr/mixture.hpp"

namespace cecmmr {

/// Which side of the threshold counts as an active cluster.
enum class ActivationRule {
  kWeightAboveEpsilon,  // cl(x, i) = 1 iff p_i(x) > eps (the training algorithm's branch)
  kWeightAtMostEpsilon,  // inverted reading: clusters above eps are marked inactive
};

struct PruningConfig {
  double epsilon = 0.01;
  ActivationRule rule = ActivationRule::kWeightAboveEpsilon;

  void validate() const;
  friend bool operator==(const PruningConfig&, const PruningConfig&) = default;
};

/// Post-training per-point cluster activation and renormalized weights.
struct ClusterAssignment {
  std::size_t points = 0;
  std::size_t components = 0;
  std::vector<std::uint8_t> activation;  // points x components, row-major, 0/1
  Matrix pruned_weights;                 // points x components, rows sum to 1
  std::vector<std::size_t> degenerate_rows;  // rows that fell back to the argmax weight
  std::vector<std::size_t> active_set;       // components active for at least one point

  bool active(std::size_t point, std::size_t component) const noexcept {
    return activation[point * components + component] != 0;
  }
};

/// Thresholds every weight at eps, zeroes the inactive ones and renormalizes each row.
/// A row with nothing above eps keeps only its largest weight (set to 1) and is
/// listed in degenerate_rows. When `allowed` is non-empty, components outside it
/// are treated as inactive for every point.
ClusterAssignment prune_assign(std::span<const MixtureParams> params, const PruningConfig& config,
                               std::span<const std::size_t> allowed = {});

struct ActiveComponents {
  std::vector<std::size_t> indices;
  std::size_t count = 0;
};

ActiveComponents active_components(const ClusterAssignment& assignment);

/// Copies of `params` with the pruned, renormalized weights substituted.
std::vector<MixtureParams> apply_assignment(std::span<const MixtureParams> params,
                                            const ClusterAssignment& assignment);

/// Component maximizing p_i N_i(y); restricted to `active` when non-empty.
/// Ties go to the lowest index.
std::size_t assign_point(const MixtureParams& params, double y,
                         std::span<const std::size_t> active = {});

/// CSV: point,active_<i>...,weight_<i>...,assigned. `targets` may be empty, in
/// which case the assigned column holds the highest-weight component.
void write_assignment_csv(std::ostream& out, const ClusterAssignment& assignment,
                          std::span<const MixtureParams> params, std::span<const double> targets);

}  // namespace cecmmr
