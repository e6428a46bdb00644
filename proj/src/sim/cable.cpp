#include "cablelab/sim/cable.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cablelab::sim {

namespace {

constexpr double kStabilitySafety = 1.0;  // fraction of the analytic 2/omega bound / 2

Eigen::Rotation2Dd rot(double angle) { return Eigen::Rotation2Dd(angle); }

}  // namespace

double CableParams::max_stable_dt() const {
  // Transverse stiffness of the angular springs is ~6x the configured bending
  // constant once the joint constant is scaled by the squared segment length;
  // the longitudinal mode sees two neighbor springs.
  const double k_lin = 2.0 * elastic_stiffness + 6.0 * bending_stiffness;
  if (k_lin <= 0.0) return inner_dt;
  const double omega = std::sqrt(k_lin / particle_mass);
  return kStabilitySafety / omega;
}

void CableParams::validate() const {
  if (length <= 0.0) throw std::invalid_argument("cable length must be positive");
  if (diameter <= 0.0) throw std::invalid_argument("cable diameter must be positive");
  if (n_particles < 3) throw std::invalid_argument("need at least 3 particles");
  if (n_keypoints < 2 || n_keypoints > n_particles)
    throw std::invalid_argument("n_keypoints must be in [2, n_particles]");
  if ((n_particles - 1) % (n_keypoints - 1) != 0)
    throw std::invalid_argument("n_particles-1 must be a multiple of n_keypoints-1");
  if (elastic_stiffness < 0.0 || damping_stiffness < 0.0 || bending_stiffness < 0.0)
    throw std::invalid_argument("stiffnesses must be non-negative");
  if (particle_mass <= 0.0) throw std::invalid_argument("particle mass must be positive");
  if (inner_dt <= 0.0) throw std::invalid_argument("inner_dt must be positive");
  if (inner_dt > max_stable_dt())
    throw std::invalid_argument("inner_dt " + std::to_string(inner_dt) +
                                " exceeds the stable substep " + std::to_string(max_stable_dt()) +
                                " for the given stiffness/mass ratio");
}

CableParams perturb(const CableParams& params, double scale) {
  if (scale < 0.05 || scale > 10.0) throw std::invalid_argument("stiffness scale out of [0.05, 10]");
  CableParams p = params;
  p.elastic_stiffness *= scale;
  p.damping_stiffness *= scale;
  p.bending_stiffness *= scale;
  if (p.inner_dt > p.max_stable_dt()) p.inner_dt = p.max_stable_dt();
  p.validate();
  return p;
}

Cable::Cable(CableParams params) : params_(params) {
  params_.validate();
  const double l0 = params_.rest_segment();
  // Joint angular constant scaled so transverse stiffness matches the
  // configured N/m value independent of discretization.
  joint_kappa_ = params_.bending_stiffness * l0 * l0;
  // Angular dashpot settling the transverse modes the stretch dampers cannot
  // reach. The coefficient sits a factor ~20 inside the explicit stability
  // limit m l0^2 / (9 h) at the millisecond reference substep.
  joint_damping_ = params_.damping_stiffness > 0.0 ? 50.0 * params_.particle_mass * l0 * l0 : 0.0;
}

SimState Cable::initial_state() const {
  const int n = params_.n_particles;
  SimState s;
  s.pos.resize(2, n);
  s.vel = Points::Zero(2, n);
  for (int i = 0; i < n; ++i) {
    s.pos(0, i) = -0.5 * params_.length + params_.rest_segment() * i;
    s.pos(1, i) = 0.0;
  }
  s.left.origin = s.pos.col(0);
  s.left.angle = 0.0;
  s.right.origin = s.pos.col(n - 1);
  s.right.angle = 0.0;
  s.t = 0.0;
  return s;
}

CableState Cable::observe(const SimState& s) const {
  const int stride = params_.keypoint_stride();
  CableState out;
  out.keypoints.resize(2, params_.n_keypoints);
  out.velocities.resize(2, params_.n_keypoints);
  for (int k = 0; k < params_.n_keypoints; ++k) {
    out.keypoints.col(k) = s.pos.col(k * stride);
    out.velocities.col(k) = s.vel.col(k * stride);
  }
  out.timestamp = s.t;
  return out;
}

void Cable::compute_forces(const SimState& s, Points& force) const {
  const int n = params_.n_particles;
  const double l0 = params_.rest_segment();
  const double ke = params_.elastic_stiffness;
  force.setZero(2, n);

  // Stretch springs between neighbors.
  for (int i = 0; i + 1 < n; ++i) {
    const Vec2 d = s.pos.col(i + 1) - s.pos.col(i);
    const double len = d.norm();
    if (len < 1e-12) continue;
    const Vec2 u = d / len;
    const Vec2 f = ke * (len - l0) * u;
    force.col(i) += f;
    force.col(i + 1) -= f;
  }

  // Angular springs over triples: U = 0.5*kappa*phi^2 with phi the signed
  // turning angle at the joint, zero when straight. The dashpot term damps
  // the turning rate through the same gradient, so rigid motion is untouched.
  for (int i = 1; i + 1 < n; ++i) {
    const Vec2 a = s.pos.col(i) - s.pos.col(i - 1);
    const Vec2 b = s.pos.col(i + 1) - s.pos.col(i);
    const double c = a.x() * b.y() - a.y() * b.x();
    const double d = a.dot(b);
    const double denom = c * c + d * d;
    if (denom < 1e-24) continue;
    const double phi = std::atan2(c, d);
    // dphi/da and dphi/db from phi = atan2(a x b, a . b).
    const Vec2 dphi_da = (d * Vec2(b.y(), -b.x()) - c * b) / denom;
    const Vec2 dphi_db = (d * Vec2(-a.y(), a.x()) - c * a) / denom;
    const Vec2 g_prev = -dphi_da;
    const Vec2 g_mid = dphi_da - dphi_db;
    const Vec2 g_next = dphi_db;
    const double phi_rate = g_prev.dot(s.vel.col(i - 1)) + g_mid.dot(s.vel.col(i)) +
                            g_next.dot(s.vel.col(i + 1));
    const double tq = joint_kappa_ * phi + joint_damping_ * phi_rate;
    force.col(i - 1) -= tq * g_prev;
    force.col(i) -= tq * g_mid;
    force.col(i + 1) -= tq * g_next;
  }
}

void Cable::apply_grippers(SimState& s, const ControlInput& u) const {
  const int n = params_.n_particles;
  const double l0 = params_.rest_segment();

  // Pair {0,1} is rigid in the left gripper frame, {n-2,n-1} in the right.
  const auto set_pair = [&](const GripperFrame& g, const Eigen::Vector3d& cmd, int pivot,
                            int second, double off) {
    const Vec2 lin(cmd.x(), cmd.y());
    const double w = cmd.z();
    const Vec2 r2 = rot(g.angle) * Vec2(off, 0.0);
    s.pos.col(pivot) = g.origin;
    s.pos.col(second) = g.origin + r2;
    s.vel.col(pivot) = lin;
    s.vel.col(second) = lin + w * Vec2(-r2.y(), r2.x());
  };
  set_pair(s.left, u.robots.at(0), 0, 1, l0);
  set_pair(s.right, u.robots.at(1), n - 1, n - 2, -l0);
}

void Cable::substep(SimState& s, const ControlInput& u, double h) const {
  const int n = params_.n_particles;
  const int n_free = n - 4;  // particles 2 .. n-3; the end pairs are kinematic
  const double m = params_.particle_mass;
  const double c = params_.damping_stiffness;

  apply_grippers(s, u);  // grasped velocities reflect the current command

  Points force(2, n);
  compute_forces(s, force);
  for (int i = 2; i < n - 2; ++i) s.vel.col(i) += (h / m) * force.col(i);

  // Dampers act on the relative velocity along each spring. Treating them
  // explicitly is unstable at the configured damping, so solve the implicit
  // system (I + (c h / m) K) v' = rhs exactly; K couples only consecutive
  // particles, so the system is block tridiagonal with 2x2 blocks and a
  // Thomas sweep solves it in O(n). Rigid motion stays undamped.
  if (c > 0.0 && n_free > 0) {
    const double alpha = c * h / m;
    std::vector<Eigen::Matrix2d> diag(static_cast<std::size_t>(n_free), Eigen::Matrix2d::Identity());
    std::vector<Eigen::Matrix2d> upper(static_cast<std::size_t>(n_free > 1 ? n_free - 1 : 0),
                                       Eigen::Matrix2d::Zero());
    std::vector<Vec2> rhs(static_cast<std::size_t>(n_free));
    for (int k = 0; k < n_free; ++k) rhs[static_cast<std::size_t>(k)] = s.vel.col(k + 2);

    for (int i = 1; i <= n - 3; ++i) {  // springs (i, i+1) touching the free range
      const Vec2 d = s.pos.col(i + 1) - s.pos.col(i);
      const double len = d.norm();
      if (len < 1e-12) continue;
      const Vec2 dir = d / len;
      const Eigen::Matrix2d proj = alpha * (dir * dir.transpose());
      const bool left_free = (i >= 2);
      const bool right_free = (i + 1 <= n - 3);
      if (left_free) diag[static_cast<std::size_t>(i - 2)] += proj;
      if (right_free) diag[static_cast<std::size_t>(i - 1)] += proj;
      if (left_free && right_free) {
        upper[static_cast<std::size_t>(i - 2)] -= proj;
      } else if (!left_free && right_free) {
        rhs[static_cast<std::size_t>(i - 1)] += proj * s.vel.col(i);  // grasped neighbor
      } else if (left_free && !right_free) {
        rhs[static_cast<std::size_t>(i - 2)] += proj * s.vel.col(i + 1);
      }
    }

    // Block Thomas: forward elimination, back substitution.
    for (int k = 1; k < n_free; ++k) {
      const Eigen::Matrix2d factor =
          upper[static_cast<std::size_t>(k - 1)].transpose() *
          diag[static_cast<std::size_t>(k - 1)].inverse();
      diag[static_cast<std::size_t>(k)] -= factor * upper[static_cast<std::size_t>(k - 1)];
      rhs[static_cast<std::size_t>(k)] -= factor * rhs[static_cast<std::size_t>(k - 1)];
    }
    Vec2 prev = diag[static_cast<std::size_t>(n_free - 1)].inverse() *
                rhs[static_cast<std::size_t>(n_free - 1)];
    s.vel.col(n_free + 1) = prev;
    for (int k = n_free - 2; k >= 0; --k) {
      prev = diag[static_cast<std::size_t>(k)].inverse() *
             (rhs[static_cast<std::size_t>(k)] - upper[static_cast<std::size_t>(k)] * prev);
      s.vel.col(k + 2) = prev;
    }
  }

  // Advance gripper frames, re-pin the grasped pairs, then move free particles.
  s.left.origin += h * Vec2(u.robots[0].x(), u.robots[0].y());
  s.left.angle += h * u.robots[0].z();
  s.right.origin += h * Vec2(u.robots[1].x(), u.robots[1].y());
  s.right.angle += h * u.robots[1].z();
  apply_grippers(s, u);

  for (int i = 2; i < n - 2; ++i) s.pos.col(i) += h * s.vel.col(i);
  s.t += h;
}

SimState Cable::step(const SimState& s, const ControlInput& u, double dt) const {
  if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
  if (u.q() != 2) throw std::invalid_argument("expected controls for exactly 2 grippers");
  const int nsub = static_cast<int>(std::ceil(dt / params_.inner_dt - 1e-9));
  const double h = dt / nsub;

  SimState out = s;
  for (int k = 0; k < nsub; ++k) substep(out, u, h);

  if (!out.pos.allFinite() || out.pos.cwiseAbs().maxCoeff() > 100.0)
    throw std::runtime_error("cable integration diverged");

  // Simulator sanity bound on keypoint spacing.
  const CableState kp = observe(out);
  const double rest = params_.length / (params_.n_keypoints - 1);
  for (int i = 0; i + 1 < kp.n(); ++i) {
    const double d = (kp.keypoints.col(i + 1) - kp.keypoints.col(i)).norm();
    if (d < 0.2 * rest || d > 3.0 * rest)
      throw std::runtime_error("keypoint spacing left the sane range [0.2, 3.0] x rest");
  }
  return out;
}

Trajectory Cable::rollout(const SimState& start, const std::vector<ControlInput>& controls,
                          double dt, SimState* final_state) const {
  Trajectory traj;
  traj.states.reserve(controls.size() + 1);
  traj.controls = controls;

  SimState cur = start;
  traj.states.push_back(observe(cur));
  for (std::size_t i = 0; i < controls.size(); ++i) {
    SimState next;
    try {
      next = step(cur, controls[i], dt);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("integration error at step " + std::to_string(i) + ": " + e.what());
    }
    CableState ks = observe(next);
    // Trajectory velocities are per-step increments, matching the dynamics
    // targets used downstream.
    ks.velocities = (ks.keypoints - traj.states.back().keypoints) / dt;
    traj.states.push_back(std::move(ks));
    cur = next;
  }
  if (final_state) *final_state = cur;
  return traj;
}

double Cable::mechanical_energy(const SimState& s) const {
  const int n = params_.n_particles;
  const double l0 = params_.rest_segment();
  double e = 0.0;
  for (int i = 0; i < n; ++i) e += 0.5 * params_.particle_mass * s.vel.col(i).squaredNorm();
  for (int i = 0; i + 1 < n; ++i) {
    const double len = (s.pos.col(i + 1) - s.pos.col(i)).norm();
    e += 0.5 * params_.elastic_stiffness * (len - l0) * (len - l0);
  }
  for (int i = 1; i + 1 < n; ++i) {
    const Vec2 a = s.pos.col(i) - s.pos.col(i - 1);
    const Vec2 b = s.pos.col(i + 1) - s.pos.col(i);
    const double phi = std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
    e += 0.5 * joint_kappa_ * phi * phi;
  }
  return e;
}

CableState make_cable(const CableParams& params) {
  Cable cable(params);
  return cable.observe(cable.initial_state());
}

}  // namespace cablelab::sim
