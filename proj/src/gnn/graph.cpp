#include "cablelab/gnn/graph.hpp"

#include <stdexcept>

namespace cablelab::gnn {

GraphSnapshot build_graph(const std::vector<Points>& history, const ControlInput& control,
                          double radius) {
  if (history.empty()) throw std::invalid_argument("build_graph needs at least one state");
  const int n = static_cast<int>(history.front().cols());
  for (const Points& p : history)
    if (p.cols() != n) throw std::invalid_argument("inconsistent key-point count across history");
  if (control.q() != 2) throw std::invalid_argument("expected controls for exactly 2 robots");

  const int m1 = static_cast<int>(history.size());  // m + 1
  GraphSnapshot g;
  g.vertex_features.setZero(2 * m1 + 3, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m1; ++j) {
      // Newest frame first: rows (2j, 2j+1) hold x_i(t - j).
      g.vertex_features.block<2, 1>(2 * j, i) = history[static_cast<std::size_t>(m1 - 1 - j)].col(i);
    }
  }
  g.vertex_features.block<3, 1>(2 * m1, 0) = control.robots[0];
  g.vertex_features.block<3, 1>(2 * m1, n - 1) = control.robots[1];

  const Points& now = history.back();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if ((now.col(i) - now.col(j)).norm() <= radius) g.edges.emplace_back(i, j);
    }
  }
  g.edge_features.resize(3, g.e());
  for (int k = 0; k < g.e(); ++k) {
    const auto [i, j] = g.edges[static_cast<std::size_t>(k)];
    const Vec2 d = now.col(i) - now.col(j);
    g.edge_features(0, k) = d.x();
    g.edge_features(1, k) = d.y();
    g.edge_features(2, k) = d.norm();
  }
  return g;
}

}  // namespace cablelab::gnn
