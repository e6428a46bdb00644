#pragma once

#include "cablelab/types.hpp"

#include <cstdint>
#include <vector>

namespace cablelab::sim {

// Smooth random exploration controls: low-pass filtered Gaussian noise
// (Ornstein-Uhlenbeck style), every component clipped to max_speed.
// Deterministic for a fixed seed.
std::vector<ControlInput> random_policy(std::uint64_t seed, int steps, double max_speed,
                                        int robots = 2, double span = 1.0);

}  // namespace cablelab::sim
