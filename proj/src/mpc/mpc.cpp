#include "cablelab/mpc/mpc.hpp"

#include "cablelab/residual/residual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cablelab::mpc {

namespace {

struct PlanResult {
  double objective = std::numeric_limits<double>::infinity();
  std::vector<Points> planned;        // P(1..h+1)
  std::vector<gnn::GnnTape> tapes;    // one per step when the model is present
  bool finite = false;
};

// Rolls the hybrid dynamics over the horizon and accumulates the objective.
PlanResult plan_forward(const std::vector<Points>& history, const Points& target,
                        const gnn::GnnModel* model, const Eigen::MatrixXd& jacobian,
                        const std::vector<ControlInput>& controls, const MpcConfig& cfg,
                        bool with_tapes) {
  PlanResult res;
  std::vector<Points> window = history;
  Points x = window.back();
  double obj = 0.0;
  if (with_tapes && model) res.tapes.resize(controls.size());

  for (std::size_t t = 0; t < controls.size(); ++t) {
    Points xdot = Points::Zero(2, x.cols());
    if (model)
      xdot += gnn::predict(*model, window, controls[t], with_tapes ? &res.tapes[t] : nullptr);
    if (jacobian.size() > 0)
      xdot += residual::predict_residual(jacobian, controls[t].flat());

    x = x + cfg.dt * xdot;
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 50.0) return res;  // res.finite = false
    obj += shape_error(x, target);
    res.planned.push_back(x);
    window.erase(window.begin());
    window.push_back(x);
  }
  res.objective = obj;
  res.finite = true;
  return res;
}

// Reverse sweep through the unrolled plan; returns the gradient with respect
// to the stacked controls, (h+1) x 6.
Eigen::MatrixXd plan_gradient(const std::vector<Points>& history, const Points& target,
                              const gnn::GnnModel* model, const Eigen::MatrixXd& jacobian,
                              const std::vector<ControlInput>& controls, const MpcConfig& cfg,
                              const PlanResult& plan) {
  const int n = static_cast<int>(target.cols());
  const int h1 = static_cast<int>(controls.size());
  const int m1 = static_cast<int>(history.size());

  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(h1, 6);
  // g_state[s] is the cotangent on planned state P(s+1), s = 0..h.
  std::vector<Points> g_state(static_cast<std::size_t>(h1), Points::Zero(2, n));
  for (int s = 0; s < h1; ++s)
    g_state[static_cast<std::size_t>(s)] = 2.0 * (plan.planned[static_cast<std::size_t>(s)] - target);

  for (int t = h1 - 1; t >= 0; --t) {
    const Points upstream = g_state[static_cast<std::size_t>(t)];
    // Identity path X(t+1) = X(t) + ...
    if (t >= 1) g_state[static_cast<std::size_t>(t - 1)] += upstream;

    if (model) {
      const gnn::GnnInputGrads ig = gnn::vjp(*model, plan.tapes[static_cast<std::size_t>(t)],
                                             cfg.dt * upstream, nullptr);
      // Window at step t held states with plan indices t-m .. t (index 0 is
      // oldest); plan index s >= 1 maps to g_state[s-1], s <= 0 is history.
      for (int idx = 0; idx < m1; ++idx) {
        const int s = t - (m1 - 1) + idx;
        if (s >= 1)
          g_state[static_cast<std::size_t>(s - 1)] += ig.d_history[static_cast<std::size_t>(idx)];
      }
      grad.row(t) += ig.d_control.transpose();
    }
    if (jacobian.size() > 0)
      grad.row(t) += (cfg.dt * (jacobian * flatten(upstream))).transpose();
  }
  return grad;
}

}  // namespace

void MpcConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("mpc horizon must be >= 1");
  if (dt <= 0.0) throw std::invalid_argument("mpc dt must be positive");
  if (lambda <= 0.0) throw std::invalid_argument("ridge lambda must be positive");
  if (!(0.0 < eta_minus && eta_minus < eta_plus && eta_plus < 1.0))
    throw std::invalid_argument("need 0 < eta_minus < eta_plus < 1");
  if (!(tau_minus < 1.0 && 1.0 < tau_plus))
    throw std::invalid_argument("need tau_minus < 1 < tau_plus");
  if (trust_init <= 0.0 || trust_min <= 0.0 || trust_max < trust_min)
    throw std::invalid_argument("bad trust region bounds");
  if (settle_tol <= 0.0) throw std::invalid_argument("settle tolerance must be positive");
  if (max_steps < 1 || solver_iters < 1) throw std::invalid_argument("bad iteration limits");
  if (omega_weight <= 0.0) throw std::invalid_argument("omega weight must be positive");
}

double shape_error(const Points& x, const Points& target) {
  if (x.cols() != target.cols()) throw std::invalid_argument("shape_error: size mismatch");
  return (x - target).squaredNorm();
}

double control_norm(const ControlInput& u, double omega_weight) {
  double worst = 0.0;
  for (const auto& r : u.robots) {
    const double n =
        std::sqrt(r.x() * r.x() + r.y() * r.y() + omega_weight * omega_weight * r.z() * r.z());
    worst = std::max(worst, n);
  }
  return worst;
}

ControlInput project_controls(const ControlInput& u, double eps, double omega_weight) {
  ControlInput out = u;
  for (auto& r : out.robots) {
    const double n =
        std::sqrt(r.x() * r.x() + r.y() * r.y() + omega_weight * omega_weight * r.z() * r.z());
    if (n > eps) r *= (eps > 0.0 ? eps / n : 0.0);
  }
  return out;
}

TrustRegionState trust_update(TrustRegionState tr, double de_actual, double de_pred,
                              const MpcConfig& cfg) {
  double rho = 0.0;  // |de_pred| ~ 0 counts as a failed prediction and shrinks
  if (std::abs(de_pred) >= 1e-12) rho = de_actual / de_pred;
  tr.rho_history.push_back(rho);
  if (rho >= cfg.eta_plus)
    tr.eps *= cfg.tau_plus;
  else if (rho <= cfg.eta_minus)
    tr.eps *= cfg.tau_minus;
  tr.eps = std::clamp(tr.eps, cfg.trust_min, cfg.trust_max);
  return tr;
}

MpcSolution solve_mpc(const std::vector<Points>& history, const Points& target,
                      const gnn::GnnModel* model, const Eigen::MatrixXd& jacobian, double eps,
                      const MpcConfig& cfg, const std::vector<ControlInput>* warm_start) {
  cfg.validate();
  if (eps < 0.0) throw std::invalid_argument("trust region size must be non-negative");
  const int h1 = cfg.horizon + 1;

  std::vector<ControlInput> controls(static_cast<std::size_t>(h1));
  if (warm_start && static_cast<int>(warm_start->size()) == h1) controls = *warm_start;
  for (auto& u : controls) u = project_controls(u, eps, cfg.omega_weight);

  const double e_now = shape_error(history.back(), target);

  PlanResult best = plan_forward(history, target, model, jacobian, controls, cfg, true);
  if (!best.finite) {
    // Fall back to the feasible rest plan.
    for (auto& u : controls) u = ControlInput(2);
    best = plan_forward(history, target, model, jacobian, controls, cfg, true);
    if (!best.finite) throw std::runtime_error("mpc: non-finite objective at zero controls");
  }

  MpcSolution sol;
  sol.objective_trace.push_back(best.objective);

  double step = 0.0;  // sized from the first gradient
  for (int it = 0; it < cfg.solver_iters; ++it) {
    const Eigen::MatrixXd grad =
        plan_gradient(history, target, model, jacobian, controls, cfg, best);
    const double gmax = grad.cwiseAbs().maxCoeff();
    if (gmax < 1e-14) break;
    if (step == 0.0) step = (0.5 * std::max(eps, 1e-6)) / gmax;

    bool improved = false;
    for (int bt = 0; bt < 30 && !improved; ++bt) {
      std::vector<ControlInput> cand(controls.size());
      double move_sq = 0.0;
      for (std::size_t i = 0; i < controls.size(); ++i) {
        const Eigen::VectorXd moved =
            controls[i].flat() - step * grad.row(static_cast<int>(i)).transpose();
        cand[i] = project_controls(ControlInput::from_flat(moved), eps, cfg.omega_weight);
        move_sq += (cand[i].flat() - controls[i].flat()).squaredNorm();
      }
      PlanResult trial = plan_forward(history, target, model, jacobian, cand, cfg, true);
      if (trial.finite && trial.objective <= best.objective - 1e-4 * move_sq / std::max(step, 1e-12)) {
        controls = std::move(cand);
        best = std::move(trial);
        step *= 1.5;
        improved = true;
      } else {
        step *= 0.5;
      }
    }
    sol.iterations = it + 1;
    const double prev = sol.objective_trace.back();
    sol.objective_trace.push_back(best.objective);
    if (!improved) break;
    if (prev - best.objective <= cfg.solver_tol * std::max(prev, 1e-12)) break;
  }

  sol.controls = controls;
  sol.objective = best.objective;
  sol.de_pred = e_now - shape_error(best.planned.front(), target);
  sol.zero_improvement = sol.de_pred < 1e-12;
  return sol;
}

}  // namespace cablelab::mpc
