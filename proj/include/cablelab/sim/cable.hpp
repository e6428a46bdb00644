#pragma once

#include "cablelab/types.hpp"

namespace cablelab::sim {

// Mass-spring chain parameters. Stiffness values follow the spring-constant
// convention (N/m); the bending value is converted internally to a per-joint
// angular constant so behavior is independent of simulation resolution.
struct CableParams {
  double length = 1.0;              // m
  double diameter = 0.01;           // m
  int n_particles = 49;             // simulation resolution
  int n_keypoints = 13;             // observed key points, subsampled from particles
  double elastic_stiffness = 4e3;   // N/m, stretch springs between neighbors
  double damping_stiffness = 2e3;   // N*s/m, dampers on relative velocity along springs
  double bending_stiffness = 3e3;   // N/m-equivalent, angular springs over triples
  double particle_mass = 0.03;      // kg
  double inner_dt = 1e-3;           // s, max explicit substep
  double global_scale = 2.0;        // config passthrough, no effect on dynamics

  double rest_segment() const { return length / (n_particles - 1); }
  int keypoint_stride() const { return (n_particles - 1) / (n_keypoints - 1); }

  // Largest explicit substep the stiffness/mass ratio allows.
  double max_stable_dt() const;

  // Throws std::invalid_argument on bad geometry or an unstable inner_dt.
  void validate() const;
};

// Scales the three stiffnesses; shrinks inner_dt when needed to stay stable.
CableParams perturb(const CableParams& params, double scale);

struct GripperFrame {
  Vec2 origin = Vec2::Zero();
  double angle = 0.0;  // rad, CCW
};

// Full simulator state. Key-point observations are a subsample of this.
struct SimState {
  Points pos;  // 2 x n_particles
  Points vel;
  GripperFrame left, right;
  double t = 0.0;
};

class Cable {
 public:
  explicit Cable(CableParams params);

  const CableParams& params() const { return params_; }

  // Straight horizontal cable centered at the origin, at rest.
  SimState initial_state() const;

  // Key-point view (positions and instantaneous velocities).
  CableState observe(const SimState& s) const;

  // Advances by dt (split into stable substeps). The grasped endpoint pairs
  // move rigidly with the commanded velocities; interior particles obey
  // stretch + bend + damping forces. Throws std::runtime_error on divergence.
  SimState step(const SimState& s, const ControlInput& u, double dt) const;

  // Repeated step; records key-point states with finite-difference velocities.
  // On integration failure rethrows with the failing step index.
  Trajectory rollout(const SimState& start, const std::vector<ControlInput>& controls,
                     double dt, SimState* final_state = nullptr) const;

  // Kinetic + stretch + bending potential energy.
  double mechanical_energy(const SimState& s) const;

 private:
  void substep(SimState& s, const ControlInput& u, double h) const;
  void compute_forces(const SimState& s, Points& force) const;
  void apply_grippers(SimState& s, const ControlInput& u) const;

  CableParams params_;
  double joint_kappa_;    // angular spring constant, N*m/rad
  double joint_damping_;  // angular dashpot, N*m*s/rad
};

// Straight-line key-point state per the construction contract.
CableState make_cable(const CableParams& params);

}  // namespace cablelab::sim
