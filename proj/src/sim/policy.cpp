#include "cablelab/sim/policy.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace cablelab::sim {

std::vector<ControlInput> random_policy(std::uint64_t seed, int steps, double max_speed,
                                        int robots, double span) {
  if (steps < 1) throw std::invalid_argument("random_policy needs steps >= 1");
  if (max_speed < 0.0) throw std::invalid_argument("max_speed must be non-negative");

  // Low-pass filtered velocity noise with two safeguards for the two-gripper
  // case: the integrated displacements revert toward a slightly slack home
  // pose, and any outward radial velocity is removed whenever the commanded
  // gripper separation would exceed the taut span. Bending exploration stays
  // free; stretching beyond ~2% never happens.
  constexpr double kRevert = 0.15;
  constexpr double kHome = 0.04;
  constexpr double kSlack = 0.08;
  const double sigma = 0.25 * max_speed;
  const double sep_max = 1.02 * span;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<ControlInput> out(static_cast<std::size_t>(steps), ControlInput(robots));
  Eigen::VectorXd v = Eigen::VectorXd::Zero(3 * robots);
  Eigen::VectorXd disp = Eigen::VectorXd::Zero(3 * robots);
  Eigen::VectorXd home = Eigen::VectorXd::Zero(3 * robots);
  if (robots == 2) {
    home[0] = kSlack;
    home[3] = -kSlack;
  }

  for (int t = 0; t < steps; ++t) {
    for (int i = 0; i < v.size(); ++i) {
      v[i] += kRevert * (0.0 - v[i]) + sigma * noise(rng) + kHome * (home[i] - disp[i]);
      v[i] = std::clamp(v[i], -max_speed, max_speed);
    }
    if (robots == 2) {
      const Vec2 left(-0.5 * span + disp[0], disp[1]);
      const Vec2 right(0.5 * span + disp[3], disp[4]);
      const Vec2 vl(v[0], v[1]), vr(v[3], v[4]);
      const Vec2 gap = right + vr - (left + vl);
      if (gap.norm() > sep_max) {
        const Vec2 u = (right - left).normalized();
        const double outward = (vr - vl).dot(u);
        if (outward > 0.0) {
          v[0] += 0.5 * outward * u.x();
          v[1] += 0.5 * outward * u.y();
          v[3] -= 0.5 * outward * u.x();
          v[4] -= 0.5 * outward * u.y();
        }
      }
    }
    for (int i = 0; i < v.size(); ++i) {
      v[i] = std::clamp(v[i], -max_speed, max_speed);
      disp[i] += v[i];
    }
    out[static_cast<std::size_t>(t)] = ControlInput::from_flat(v);
  }
  return out;
}

}  // namespace cablelab::sim
