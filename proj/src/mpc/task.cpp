#include "cablelab/mpc/task.hpp"

#include "cablelab/residual/residual.hpp"
#include "cablelab/sim/policy.hpp"

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <stdexcept>

namespace cablelab::mpc {

namespace {

using Clock = std::chrono::steady_clock;

// Shortest round-trip decimal form, stable across runs.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// 2N x 3Q sensitivity of the key-point velocity to the control, by central
// differences on the true simulator. Transposed it plays the role of J.
Eigen::MatrixXd oracle_jacobian(const sim::Cable& cable, const sim::SimState& state, double dt) {
  const int n2 = 2 * cable.params().n_keypoints;
  Eigen::MatrixXd sensitivity(n2, 6);
  const double delta = 0.01;
  for (int c = 0; c < 6; ++c) {
    Eigen::VectorXd up = Eigen::VectorXd::Zero(6), dn = Eigen::VectorXd::Zero(6);
    up[c] = delta;
    dn[c] = -delta;
    const Points xp = cable.observe(cable.step(state, ControlInput::from_flat(up), dt)).keypoints;
    const Points xn = cable.observe(cable.step(state, ControlInput::from_flat(dn), dt)).keypoints;
    sensitivity.col(c) = flatten(((xp - xn) / (2.0 * delta)) / dt);
  }
  return sensitivity;
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Direct: return "direct";
    case Mode::Servo: return "servo";
    case Mode::Hybrid: return "hybrid";
    case Mode::Oracle: return "oracle";
  }
  return "?";
}

Mode mode_from_string(const std::string& name) {
  if (name == "direct") return Mode::Direct;
  if (name == "servo") return Mode::Servo;
  if (name == "hybrid") return Mode::Hybrid;
  if (name == "oracle") return Mode::Oracle;
  throw std::invalid_argument("unknown mode: " + name);
}

double mean_keypoint_distance(const Points& x, const Points& target) {
  if (x.cols() != target.cols()) throw std::invalid_argument("size mismatch");
  double total = 0.0;
  for (int i = 0; i < x.cols(); ++i) total += (x.col(i) - target.col(i)).norm();
  return total / static_cast<double>(x.cols());
}

TaskLog run_task(const sim::Scenario& scenario, const sim::CableParams& nominal,
                 const gnn::GnnModel* model, Mode mode, const TaskConfig& cfg,
                 std::uint64_t seed) {
  cfg.mpc.validate();
  if ((mode == Mode::Direct || mode == Mode::Hybrid) && (model == nullptr || !model->trained))
    throw std::invalid_argument("mode " + to_string(mode) + " needs a trained model");

  const sim::CableParams true_params = sim::perturb(nominal, scenario.stiffness_scale);
  const sim::Cable cable(true_params);
  const int n = nominal.n_keypoints;
  const int m1 = cfg.window + 1;
  const double dt = cfg.mpc.dt;
  const double lambda_si = cfg.mpc.lambda * cfg.lambda_unit;
  const bool learns = (mode == Mode::Servo || mode == Mode::Hybrid);
  const gnn::GnnModel* planner_model = (mode == Mode::Direct || mode == Mode::Hybrid) ? model : nullptr;

  TaskLog log;
  log.mode = mode;
  log.seed = seed;
  log.target = scenario.target;

  sim::SimState state = cable.initial_state();
  std::deque<Points> window(static_cast<std::size_t>(m1), cable.observe(state).keypoints);
  residual::ResidualBuffer buffer(m1, 6, 2 * n);
  Eigen::MatrixXd jacobian = Eigen::MatrixXd::Zero(6, 2 * n);
  TrustRegionState trust{cfg.mpc.trust_init, {}};
  std::vector<ControlInput> warm;

  const auto history_vec = [&] { return std::vector<Points>(window.begin(), window.end()); };
  const auto advance = [&](const ControlInput& u) {
    const Points x_t = window.back();
    Points offline = Points::Zero(2, n);
    if (mode == Mode::Hybrid) offline = gnn::predict(*model, history_vec(), u);
    state = cable.step(state, u, dt);
    const Points x_next = cable.observe(state).keypoints;
    if (learns) buffer.observe(u.flat(), x_t, x_next, offline, dt);
    window.pop_front();
    window.push_back(x_next);
  };

  try {
    double err_mean = mean_keypoint_distance(window.back(), scenario.target);

    // Seeded exploratory moves around the start pose; they vary the runs
    // across seeds and give the online fit its first samples.
    if (err_mean >= cfg.mpc.settle_tol && cfg.warmup_steps > 0) {
      for (const ControlInput& u : sim::random_policy(seed, cfg.warmup_steps, cfg.warmup_speed))
        advance(u);
    }

    for (int t = 0; t < cfg.mpc.max_steps; ++t) {
      const Points x_t = window.back();
      err_mean = mean_keypoint_distance(x_t, scenario.target);
      if (err_mean < cfg.mpc.settle_tol) break;

      if (learns && !buffer.empty()) jacobian = residual::solve(buffer, lambda_si);
      if (mode == Mode::Oracle) jacobian = oracle_jacobian(cable, state, dt).transpose();

      const auto t0 = Clock::now();
      const MpcSolution sol = solve_mpc(history_vec(), scenario.target, planner_model, jacobian,
                                        trust.eps, cfg.mpc, warm.empty() ? nullptr : &warm);
      const double wall = ms_since(t0);

      const ControlInput u = sol.controls.front();
      if (control_norm(u, cfg.mpc.omega_weight) > trust.eps + 1e-12)
        throw std::runtime_error("executed control violates the trust-region bound");

      TaskStep rec;
      rec.step = t;
      rec.time_s = t * dt;
      rec.error_m = err_mean;
      rec.error_sq = shape_error(x_t, scenario.target);
      rec.eps = trust.eps;
      rec.de_pred = sol.de_pred;
      rec.j_fro = jacobian.norm();
      rec.wall_ms = wall;
      rec.control = u;
      rec.state = cable.observe(state);

      advance(u);
      rec.de_actual = rec.error_sq - shape_error(window.back(), scenario.target);

      trust = trust_update(trust, rec.de_actual, rec.de_pred, cfg.mpc);
      rec.rho = trust.rho_history.back();
      log.steps.push_back(std::move(rec));

      // Receding-horizon warm start: shift by one, repeat the tail.
      warm.assign(sol.controls.begin() + 1, sol.controls.end());
      warm.push_back(sol.controls.back());
    }
  } catch (const std::exception& e) {
    log.error_cause = e.what();
  }

  log.final_state = cable.observe(state);
  log.total_steps = static_cast<int>(log.steps.size());
  log.terminal_error_m = mean_keypoint_distance(window.back(), scenario.target);
  log.settled = log.error_cause.empty() && log.terminal_error_m < cfg.mpc.settle_tol;
  log.settling_time_s = log.settled ? log.total_steps * dt : cfg.mpc.max_steps * dt;
  return log;
}

void write_task_csv(const TaskLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "step,time_s,error_m,eps,rho,mode,seed\n";
  for (const TaskStep& s : log.steps) {
    out << s.step << ',' << fmt(s.time_s) << ',' << fmt(s.error_m) << ',' << fmt(s.eps) << ','
        << fmt(s.rho) << ',' << to_string(log.mode) << ',' << log.seed << '\n';
  }
}

void write_task_summary_json(const TaskLog& log, const std::string& path) {
  nlohmann::json j;
  j["mode"] = to_string(log.mode);
  j["seed"] = log.seed;
  j["terminal_error_cm"] = 100.0 * log.terminal_error_m;
  j["settling_time_s"] = log.settling_time_s;
  j["settled"] = log.settled;
  j["steps"] = log.total_steps;
  if (!log.error_cause.empty()) j["error"] = log.error_cause;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << '\n';
}

}  // namespace cablelab::mpc
