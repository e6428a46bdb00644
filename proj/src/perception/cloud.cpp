#include "cablelab/perception/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace cablelab::perception {

PointCloud render_cloud(const CableState& state, int pts_per_segment, double noise_sigma,
                        double outlier_ratio, std::uint64_t seed) {
  if (pts_per_segment < 1) throw std::invalid_argument("pts_per_segment must be >= 1");
  if (outlier_ratio < 0.0 || outlier_ratio > 1.0)
    throw std::invalid_argument("outlier_ratio must be in [0, 1]");

  const int n = state.n();
  const int s_total = (n - 1) * pts_per_segment;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  PointCloud cloud;
  cloud.points.resize(2, s_total);
  int idx = 0;
  for (int seg = 0; seg + 1 < n; ++seg) {
    for (int k = 0; k < pts_per_segment; ++k) {
      const double u = unit(rng);
      Vec2 p = (1.0 - u) * state.keypoints.col(seg) + u * state.keypoints.col(seg + 1);
      if (noise_sigma > 0.0) p += noise_sigma * Vec2(gauss(rng), gauss(rng));
      cloud.points.col(idx++) = p;
    }
  }

  const int n_out = static_cast<int>(std::lround(outlier_ratio * s_total));
  if (n_out > 0) {
    Vec2 lo = state.keypoints.rowwise().minCoeff();
    Vec2 hi = state.keypoints.rowwise().maxCoeff();
    const double pad = 0.2 * std::max((hi - lo).x(), (hi - lo).y());
    lo.array() -= pad;
    hi.array() += pad;

    std::vector<int> order(static_cast<std::size_t>(s_total));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int k = 0; k < n_out; ++k) {
      const int j = order[static_cast<std::size_t>(k)];
      cloud.points(0, j) = lo.x() + (hi.x() - lo.x()) * unit(rng);
      cloud.points(1, j) = lo.y() + (hi.y() - lo.y()) * unit(rng);
    }
  }
  return cloud;
}

}  // namespace cablelab::perception
