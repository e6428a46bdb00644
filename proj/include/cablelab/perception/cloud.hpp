#pragma once

#include "cablelab/types.hpp"

#include <cstdint>

namespace cablelab::perception {

struct PointCloud {
  Points points;  // 2 x S, meters
  int size() const { return static_cast<int>(points.cols()); }
};

// Synthetic camera stand-in: samples points uniformly at random along the
// polyline segments of the state, adds isotropic Gaussian noise, and replaces
// round(outlier_ratio * S) points with uniform samples over the workspace
// bounding box inflated by 20%.
PointCloud render_cloud(const CableState& state, int pts_per_segment, double noise_sigma,
                        double outlier_ratio, std::uint64_t seed);

}  // namespace cablelab::perception
