#pragma once

#include "cablelab/gnn/model.hpp"
#include "cablelab/types.hpp"

#include <deque>

namespace cablelab::residual {

// Sliding window of (control, state-increment error) pairs used to fit the
// online linear residual model. Capacity is m+1 samples.
class ResidualBuffer {
 public:
  explicit ResidualBuffer(int capacity, int control_dim = 6, int state_dim = 26);

  // delta_xdot(t) = (X(t+1) - X(t)) / dt - offline_prediction; evicts the
  // oldest entry when full.
  void observe(const Eigen::VectorXd& control, const Points& x_t, const Points& x_next,
               const Points& offline_prediction, double dt);

  void push(const Eigen::VectorXd& control, const Eigen::VectorXd& delta_xdot);

  int size() const { return static_cast<int>(entries_.size()); }
  int capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }

  // Time-ordered stacks, oldest row first: controls is w x 3Q, residuals w x 2N.
  Eigen::MatrixXd control_rows() const;
  Eigen::MatrixXd residual_rows() const;

 private:
  struct Entry {
    Eigen::VectorXd control;
    Eigen::VectorXd delta;
  };
  std::deque<Entry> entries_;
  int capacity_;
  int control_dim_, state_dim_;
};

// Ridge regression over the window: J = (R^T R + lambda I)^{-1} R^T dX,
// one shared factorization applied to all 2N residual columns. lambda > 0
// keeps the system positive definite, so the minimizer is unique.
Eigen::MatrixXd solve(const ResidualBuffer& buffer, double lambda);

// delta_xdot = R J reshaped to 2 x N.
Points predict_residual(const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& control);

// Offline prediction plus the linear correction. A null model is the pure
// visual-servo mode: the correction term alone.
Points hybrid_predict(const gnn::GnnModel* model, const std::vector<Points>& history,
                      const ControlInput& control, const Eigen::MatrixXd& jacobian);

}  // namespace cablelab::residual
