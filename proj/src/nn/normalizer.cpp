#include "cablelab/nn/normalizer.hpp"

#include <stdexcept>

namespace cablelab::nn {

Normalizer Normalizer::fit(const Eigen::MatrixXd& samples) {
  if (samples.cols() < 1) throw std::invalid_argument("normalizer needs at least one sample");
  Normalizer n;
  n.mean = samples.rowwise().mean();
  const Eigen::MatrixXd centered = samples.colwise() - n.mean;
  n.std = (centered.cwiseProduct(centered).rowwise().mean()).cwiseSqrt();
  n.std = n.std.cwiseMax(1e-8);  // constant features pass through unscaled
  return n;
}

Normalizer Normalizer::identity(Eigen::Index n) {
  Normalizer out;
  out.mean = Eigen::VectorXd::Zero(n);
  out.std = Eigen::VectorXd::Ones(n);
  return out;
}

}  // namespace cablelab::nn
