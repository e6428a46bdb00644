#pragma once

#include "cablelab/types.hpp"

#include <utility>
#include <vector>

namespace cablelab::gnn {

// One dynamics input: vertex features stack the m+1 most recent key-point
// positions (newest first) plus a 3-slot control (the robot velocity on the
// grasped end vertices, zeros elsewhere). Edges connect vertex pairs within
// the connective radius, both directions, with feature [dx, dy, |d|] taken at
// the newest frame.
struct GraphSnapshot {
  Eigen::MatrixXd vertex_features;          // (2(m+1)+3) x N
  Eigen::MatrixXd edge_features;            // 3 x E
  std::vector<std::pair<int, int>> edges;   // directed (i, j), lexicographically sorted

  int n() const { return static_cast<int>(vertex_features.cols()); }
  int e() const { return static_cast<int>(edges.size()); }
  int window() const { return static_cast<int>((vertex_features.rows() - 3) / 2) - 1; }
};

// history holds m+1 key-point sets in time order (oldest first, newest last),
// all with the same N. Throws on inconsistent sizes.
GraphSnapshot build_graph(const std::vector<Points>& history, const ControlInput& control,
                          double radius);

}  // namespace cablelab::gnn
