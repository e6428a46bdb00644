#include "cablelab/perception/gmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cablelab::perception {

namespace {

constexpr double kSigma2Floor = 1e-10;
constexpr double kStarveEps = 1e-12;

// Per-point component log-weights a_n = log p(n) + log p(y|n); the outlier
// row is log(mu/S). Shared across likelihood and responsibility paths.
Eigen::MatrixXd component_logs(const PointCloud& cloud, const Points& x, double sigma2,
                               double mu) {
  const int n = static_cast<int>(x.cols());
  const int s = cloud.size();
  const double log_norm = -std::log(2.0 * std::numbers::pi * sigma2);  // 2D Gaussian constant
  const double log_w = (mu < 1.0) ? std::log((1.0 - mu) / n) : -std::numeric_limits<double>::infinity();
  const double log_out = (mu > 0.0) ? std::log(mu / s) : -std::numeric_limits<double>::infinity();

  Eigen::MatrixXd logs(n + 1, s);
  for (int j = 0; j < s; ++j) {
    for (int i = 0; i < n; ++i) {
      const double d2 = (cloud.points.col(j) - x.col(i)).squaredNorm();
      logs(i, j) = log_w + log_norm - 0.5 * d2 / sigma2;
    }
    logs(n, j) = log_out;
  }
  return logs;
}

}  // namespace

void GmmConfig::validate() const {
  if (mu < 0.0 || mu >= 1.0) throw std::invalid_argument("outlier weight mu must be in [0, 1)");
  if (sigma2_init <= 0.0) throw std::invalid_argument("sigma2_init must be positive");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (tol < 0.0) throw std::invalid_argument("tol must be non-negative");
}

double log_likelihood(const PointCloud& cloud, const Points& keypoints, double sigma2, double mu) {
  if (sigma2 <= 0.0) throw std::invalid_argument("sigma2 must be positive");
  if (!cloud.points.allFinite() || !keypoints.allFinite())
    throw std::invalid_argument("non-finite input to log_likelihood");

  const Eigen::MatrixXd logs = component_logs(cloud, keypoints, sigma2, mu);
  double total = 0.0;
  for (int j = 0; j < logs.cols(); ++j) {
    const double m = logs.col(j).maxCoeff();
    total += m + std::log((logs.col(j).array() - m).exp().sum());
  }
  return total;
}

Eigen::MatrixXd responsibilities(const PointCloud& cloud, const Points& keypoints, double sigma2,
                                 double mu) {
  Eigen::MatrixXd logs = component_logs(cloud, keypoints, sigma2, mu);
  for (int j = 0; j < logs.cols(); ++j) {
    const double m = logs.col(j).maxCoeff();
    Eigen::ArrayXd e = (logs.col(j).array() - m).exp();
    logs.col(j) = e / e.sum();
  }
  return logs;
}

EmResult em_fit(const PointCloud& cloud, const Points& initial, const GmmConfig& config) {
  config.validate();
  const int n = static_cast<int>(initial.cols());
  const int s = cloud.size();
  if (s < n) throw std::invalid_argument("cloud must have at least as many points as keypoints");

  EmResult res;
  res.keypoints = initial;
  res.sigma2 = config.sigma2_init;
  res.starved.assign(static_cast<std::size_t>(n), false);
  res.log_likelihood.push_back(log_likelihood(cloud, res.keypoints, res.sigma2, config.mu));

  for (int it = 0; it < config.max_iters; ++it) {
    const Eigen::MatrixXd r = responsibilities(cloud, res.keypoints, res.sigma2, config.mu);

    // M-step: weighted means, then the shared variance with the new means.
    double weight_total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double nk = r.row(i).sum();
      if (nk < kStarveEps) {
        res.starved[static_cast<std::size_t>(i)] = true;
        continue;
      }
      Vec2 mean = Vec2::Zero();
      for (int j = 0; j < s; ++j) mean += r(i, j) * cloud.points.col(j);
      res.keypoints.col(i) = mean / nk;
      weight_total += nk;
    }
    if (weight_total > kStarveEps) {
      double sq = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < s; ++j)
          sq += r(i, j) * (cloud.points.col(j) - res.keypoints.col(i)).squaredNorm();
      res.sigma2 = std::max(sq / (2.0 * weight_total), kSigma2Floor);
    }

    res.iterations = it + 1;
    const double ll = log_likelihood(cloud, res.keypoints, res.sigma2, config.mu);
    const double prev = res.log_likelihood.back();
    res.log_likelihood.push_back(ll);
    if (std::abs(ll - prev) <= config.tol * (std::abs(prev) + 1e-12)) break;
  }
  return res;
}

}  // namespace cablelab::perception
