#pragma once

#include "cablelab/gnn/model.hpp"
#include "cablelab/types.hpp"

#include <vector>

namespace cablelab::mpc {

struct MpcConfig {
  int horizon = 5;            // h; controls R(0..h) are optimized
  double dt = 1.0;            // dynamics sample time, s
  double lambda = 10.0;       // ridge weight for the online residual fit
  double trust_init = 0.05;   // initial trust-region size, m-scale norm bound
  double eta_plus = 0.8;
  double eta_minus = 0.4;
  double tau_plus = 1.05;
  double tau_minus = 0.95;
  double settle_tol = 0.01;   // terminal threshold e on mean key-point distance, m
  int max_steps = 60;
  int solver_iters = 12;
  double solver_tol = 1e-6;   // relative objective improvement
  double omega_weight = 0.1;  // m/rad weight commensurating wz in the control norm
  double trust_min = 1e-4;
  double trust_max = 0.5;

  void validate() const;
};

// Sum of squared key-point distances, m^2.
double shape_error(const Points& x, const Points& target);

// Control norm used by the trust-region bound: per-robot Euclidean norm of
// (vx, vy, w * wz). Returns the max over robots.
double control_norm(const ControlInput& u, double omega_weight);

// Projects each robot's 3-vector onto the weighted norm ball of radius eps.
ControlInput project_controls(const ControlInput& u, double eps, double omega_weight);

struct TrustRegionState {
  double eps = 0.05;
  std::vector<double> rho_history;
};

// rho = de_actual / de_pred; expand by tau_plus when rho >= eta_plus, shrink
// by tau_minus when rho <= eta_minus. |de_pred| below 1e-12 forces a shrink
// (rho defined as 0). eps stays clamped to [trust_min, trust_max].
TrustRegionState trust_update(TrustRegionState tr, double de_actual, double de_pred,
                              const MpcConfig& cfg);

struct MpcSolution {
  std::vector<ControlInput> controls;   // h+1 entries
  double objective = 0.0;               // sum over planned states of shape_error
  double de_pred = 0.0;                 // current error minus first planned state error
  std::vector<double> objective_trace;  // non-increasing across solver iterations
  bool zero_improvement = false;
  int iterations = 0;
};

// Single-shooting projected gradient over the hybrid dynamics
//   Xdot = f_model(window, R) + J^T R    (either term may be absent)
// with X(t+1) = X(t) + Xdot dt. Gradients of the objective flow through the
// model's input sensitivities (positions across the shifting window, control
// slots) and through J. Each gradient step is followed by projection onto the
// per-robot trust-region ball and a backtracking line search, so the
// objective trace is monotone.
MpcSolution solve_mpc(const std::vector<Points>& history, const Points& target,
                      const gnn::GnnModel* model, const Eigen::MatrixXd& jacobian, double eps,
                      const MpcConfig& cfg, const std::vector<ControlInput>* warm_start = nullptr);

}  // namespace cablelab::mpc
