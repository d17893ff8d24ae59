#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "cecmmr/experiment.hpp"

namespace cecmmr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Versioned little-endian binary snapshot of a fitted model: network weights,
/// batch-norm running stats, Adam state, head, standardization and pruning.
/// See docs/checkpoint_format.md.
void write_checkpoint(std::ostream& out, const FittedModel& fitted);
FittedModel read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const FittedModel& fitted);
FittedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace cecmmr
