#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace cablelab::nn {

struct AdamConfig {
  double lr_start = 1e-4;
  double lr_end = 1e-6;
  std::int64_t schedule_steps = 1;  // steps over which lr decays exponentially
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment accumulators plus the decay schedule position.
struct OptimizerState {
  Eigen::VectorXd m, v;
  std::int64_t step = 0;
  AdamConfig cfg;

  OptimizerState(Eigen::Index n, AdamConfig c)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)), cfg(c) {}

  // Exponential interpolation lr_start -> lr_end over schedule_steps.
  double current_lr() const;
};

// Bias-corrected Adam update in place. Throws std::runtime_error naming the
// first offending index if a gradient is non-finite.
void adam_step(OptimizerState& opt, Eigen::Ref<Eigen::VectorXd> params,
               const Eigen::VectorXd& grads);

}  // namespace cablelab::nn
