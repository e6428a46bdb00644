#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace cablelab {

using Vec2 = Eigen::Vector2d;

// Ordered 2D points, one column per point.
using Points = Eigen::Matrix2Xd;

// Object state: N ordered key points with velocities, SI units.
struct CableState {
  Points keypoints;         // 2 x N, meters
  Points velocities;        // 2 x N, m/s
  double timestamp = 0.0;   // seconds

  int n() const { return static_cast<int>(keypoints.cols()); }
};

// Per-robot planar end-effector velocity (vx, vy, wz) in m/s and rad/s.
struct ControlInput {
  std::vector<Eigen::Vector3d> robots;

  ControlInput() : robots(2, Eigen::Vector3d::Zero()) {}
  explicit ControlInput(int q) : robots(static_cast<std::size_t>(q), Eigen::Vector3d::Zero()) {}

  int q() const { return static_cast<int>(robots.size()); }

  // Stacked [r_1; r_2; ...], length 3Q.
  Eigen::VectorXd flat() const {
    Eigen::VectorXd out(3 * q());
    for (int i = 0; i < q(); ++i) out.segment<3>(3 * i) = robots[static_cast<std::size_t>(i)];
    return out;
  }

  static ControlInput from_flat(const Eigen::VectorXd& v) {
    ControlInput c(static_cast<int>(v.size()) / 3);
    for (int i = 0; i < c.q(); ++i) c.robots[static_cast<std::size_t>(i)] = v.segment<3>(3 * i);
    return c;
  }

  bool is_zero() const {
    for (const auto& r : robots)
      if (r.norm() > 0) return false;
    return true;
  }
};

struct Trajectory {
  std::vector<CableState> states;      // length T+1
  std::vector<ControlInput> controls;  // length T
};

// Column-major flattening of a 2xN point set: [x0, y0, x1, y1, ...], length 2N.
inline Eigen::VectorXd flatten(const Points& p) {
  return Eigen::Map<const Eigen::VectorXd>(p.data(), p.size());
}

// Stable seed mixer for deriving independent streams.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Points unflatten(const Eigen::VectorXd& v) {
  return Eigen::Map<const Points>(v.data(), 2, v.size() / 2);
}

}  // namespace cablelab
