#pragma once

#include <random>

namespace cecmmr {

/// Engine used for every seeded stream (init, dropout, shuffling, generators).
using Rng = std::mt19937_64;

}  // namespace cecmmr
