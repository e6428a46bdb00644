#pragma once

#include "cablelab/perception/cloud.hpp"
#include "cablelab/sim/cable.hpp"
#include "cablelab/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cablelab::io {

// Trajectory files are JSON Lines: a header record with the parameters and
// seed, then one record per step {"t": k, "X": [[x,y]...], "R": [[vx,vy,wz]...]};
// the final record carries the last state and no "R".
struct TrajectoryHeader {
  sim::CableParams params;
  std::uint64_t seed = 0;
  double dt = 1.0;
  double stiffness_scale = 1.0;
};

void write_trajectory(const std::string& path, const TrajectoryHeader& header,
                      const Trajectory& traj);
Trajectory read_trajectory(const std::string& path, TrajectoryHeader* header = nullptr);

// Cloud files: one record per frame {"t": k, "Y": [[x,y]...]}.
void write_clouds(const std::string& path, const std::vector<perception::PointCloud>& clouds);
std::vector<perception::PointCloud> read_clouds(const std::string& path);

// Key-point files in the trajectory format, no controls.
void write_keypoints(const std::string& path, const std::vector<Points>& frames);
std::vector<Points> read_keypoints(const std::string& path);

// Write-to-temp-then-rename, so concurrent producers never expose a partial file.
void atomic_write_text(const std::string& path, const std::string& text);

}  // namespace cablelab::io
