#include "cablelab/nn/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cablelab::nn {

double OptimizerState::current_lr() const {
  if (cfg.schedule_steps <= 1 || cfg.lr_start == cfg.lr_end) return cfg.lr_start;
  const double t = std::min<double>(1.0, static_cast<double>(step) /
                                             static_cast<double>(cfg.schedule_steps));
  return cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, t);
}

void adam_step(OptimizerState& opt, Eigen::Ref<Eigen::VectorXd> params,
               const Eigen::VectorXd& grads) {
  if (params.size() != opt.m.size() || grads.size() != opt.m.size())
    throw std::invalid_argument("adam: parameter/gradient size mismatch");
  if (!grads.allFinite()) {
    for (Eigen::Index i = 0; i < grads.size(); ++i)
      if (!std::isfinite(grads[i]))
        throw std::runtime_error("non-finite gradient at parameter index " + std::to_string(i));
  }

  const double lr = opt.current_lr();
  opt.step += 1;
  const double b1 = opt.cfg.beta1, b2 = opt.cfg.beta2;
  opt.m = b1 * opt.m + (1.0 - b1) * grads;
  opt.v = b2 * opt.v.array().matrix() + (1.0 - b2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(opt.step));
  params.array() -=
      lr * (opt.m.array() / c1) / ((opt.v.array() / c2).sqrt() + opt.cfg.eps);
}

}  // namespace cablelab::nn
