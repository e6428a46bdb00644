#include "cablelab/residual/residual.hpp"

#include <stdexcept>

namespace cablelab::residual {

ResidualBuffer::ResidualBuffer(int capacity, int control_dim, int state_dim)
    : capacity_(capacity), control_dim_(control_dim), state_dim_(state_dim) {
  if (capacity < 1) throw std::invalid_argument("buffer capacity must be >= 1");
}

void ResidualBuffer::observe(const Eigen::VectorXd& control, const Points& x_t,
                             const Points& x_next, const Points& offline_prediction, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
  const Points delta = (x_next - x_t) / dt - offline_prediction;
  push(control, flatten(delta));
}

void ResidualBuffer::push(const Eigen::VectorXd& control, const Eigen::VectorXd& delta_xdot) {
  if (control.size() != control_dim_ || delta_xdot.size() != state_dim_)
    throw std::invalid_argument("residual buffer dimension mismatch");
  entries_.push_back({control, delta_xdot});
  while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
}

Eigen::MatrixXd ResidualBuffer::control_rows() const {
  Eigen::MatrixXd r(size(), control_dim_);
  for (int i = 0; i < size(); ++i) r.row(i) = entries_[static_cast<std::size_t>(i)].control;
  return r;
}

Eigen::MatrixXd ResidualBuffer::residual_rows() const {
  Eigen::MatrixXd d(size(), state_dim_);
  for (int i = 0; i < size(); ++i) d.row(i) = entries_[static_cast<std::size_t>(i)].delta;
  return d;
}

Eigen::MatrixXd solve(const ResidualBuffer& buffer, double lambda) {
  if (buffer.empty()) throw std::invalid_argument("cannot solve on an empty buffer");
  if (lambda <= 0.0) throw std::invalid_argument("lambda must be positive");

  const Eigen::MatrixXd r = buffer.control_rows();
  const Eigen::MatrixXd d = buffer.residual_rows();
  const int q3 = static_cast<int>(r.cols());
  const Eigen::MatrixXd gram =
      r.transpose() * r + lambda * Eigen::MatrixXd::Identity(q3, q3);
  return gram.ldlt().solve(r.transpose() * d);
}

Points predict_residual(const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& control) {
  if (jacobian.rows() != control.size())
    throw std::invalid_argument("jacobian rows must match the stacked control length");
  const Eigen::VectorXd flat = jacobian.transpose() * control;
  return unflatten(flat);
}

Points hybrid_predict(const gnn::GnnModel* model, const std::vector<Points>& history,
                      const ControlInput& control, const Eigen::MatrixXd& jacobian) {
  Points correction = predict_residual(jacobian, control.flat());
  if (model == nullptr) return correction;
  return gnn::predict(*model, history, control) + correction;
}

}  // namespace cablelab::residual
