#pragma once

#include "cablelab/sim/cable.hpp"
#include "cablelab/types.hpp"

#include <cstdint>
#include <string>

namespace cablelab::sim {

// Canonical parametric target curves, arc-length resampled to n points whose
// polyline totals `length`. kind: "line", "U", "S", "Z".
Points target_shape(const std::string& kind, int n, double length);

// Smooth random curve of the given arc length (bounded random curvature).
Points random_shape(int n, double length, std::uint64_t seed);

struct Scenario {
  std::string name;        // U | S | Z | random
  Points target;           // desired key points X_d
  CableState initial;      // straight line by default
  double stiffness_scale = 1.0;
};

// Builds a scenario from a shape label; validates the target arc length
// against the cable length (1% tolerance).
Scenario make_scenario(const std::string& name, const CableParams& params, double stiffness_scale,
                       std::uint64_t seed = 0);

double polyline_length(const Points& p);

}  // namespace cablelab::sim
