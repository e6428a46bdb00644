#pragma once

#include "cablelab/mpc/mpc.hpp"
#include "cablelab/sim/cable.hpp"
#include "cablelab/sim/shapes.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cablelab::mpc {

// Closed-loop operating modes:
//   Direct: offline model only, residual frozen at zero.
//   Servo:  no offline model; the online least-squares Jacobian alone.
//   Hybrid: offline model plus the online residual correction.
//   Oracle: the true simulator, linearized per step by finite differences,
//           used as the model (no learning anywhere).
enum class Mode { Direct, Servo, Hybrid, Oracle };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);

struct TaskConfig {
  MpcConfig mpc;
  int window = 5;              // residual buffer holds window+1 samples
  int warmup_steps = 6;        // seeded random moves around the start pose
  double warmup_speed = 0.02;  // m/s
  // The ridge weight is calibrated on the centimeter velocity scale used by
  // the reported metrics; this converts it to SI (m/s)^2.
  double lambda_unit = 1e-4;
};

struct TaskStep {
  int step = 0;
  double time_s = 0.0;
  double error_m = 0.0;    // mean per-key-point distance to target
  double error_sq = 0.0;   // shape_error, m^2
  double eps = 0.0;        // trust-region size when the control was computed
  double rho = 0.0;
  double de_pred = 0.0;
  double de_actual = 0.0;
  double j_fro = 0.0;      // Frobenius norm of the residual Jacobian
  double wall_ms = 0.0;
  ControlInput control;
  CableState state;        // state the control was computed from
};

struct TaskLog {
  std::vector<TaskStep> steps;
  CableState final_state;
  Points target;
  Mode mode = Mode::Hybrid;
  std::uint64_t seed = 0;
  double terminal_error_m = 0.0;
  double settling_time_s = 0.0;
  bool settled = false;
  int total_steps = 0;
  std::string error_cause;  // empty on a clean run
};

double mean_keypoint_distance(const Points& x, const Points& target);

// Algorithm: loop { solve MPC -> execute the first control on the true
// (stiffness-perturbed) simulator -> feed the residual buffer -> refit J ->
// adapt the trust region } until the mean key-point error drops below the
// settle tolerance or max_steps elapse.
TaskLog run_task(const sim::Scenario& scenario, const sim::CableParams& nominal,
                 const gnn::GnnModel* model, Mode mode, const TaskConfig& cfg,
                 std::uint64_t seed);

void write_task_csv(const TaskLog& log, const std::string& path);
void write_task_summary_json(const TaskLog& log, const std::string& path);

}  // namespace cablelab::mpc
