#pragma once

#include <Eigen/Dense>

namespace cablelab::nn {

// Per-feature standardization statistics. Columns of a sample matrix are
// individual samples; rows are features.
struct Normalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  static Normalizer fit(const Eigen::MatrixXd& samples);
  static Normalizer identity(Eigen::Index n);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const {
    return (raw.colwise() - mean).array().colwise() / std.array();
  }
  Eigen::MatrixXd invert(const Eigen::MatrixXd& normed) const {
    return (normed.array().colwise() * std.array()).colwise() + mean.array();
  }
  // Chain rule through apply(): d(raw) = d(normed) / std.
  Eigen::MatrixXd grad_to_raw(const Eigen::MatrixXd& g) const {
    return g.array().colwise() / std.array();
  }
  // Chain rule through invert(): d(normed) = d(raw) * std.
  Eigen::MatrixXd grad_to_normed(const Eigen::MatrixXd& g) const {
    return g.array().colwise() * std.array();
  }
};

}  // namespace cablelab::nn
