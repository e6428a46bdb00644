#pragma once

#include "cablelab/perception/cloud.hpp"
#include "cablelab/types.hpp"

#include <vector>

namespace cablelab::perception {

struct GmmConfig {
  double mu = 0.1;           // uniform outlier weight, in [0, 1)
  double sigma2_init = 1e-4;  // m^2
  int max_iters = 50;
  double tol = 1e-6;         // relative log-likelihood change

  void validate() const;
};

struct EmResult {
  Points keypoints;                     // estimated centroids, 2 x N
  double sigma2 = 0.0;                  // shared isotropic variance
  int iterations = 0;
  std::vector<double> log_likelihood;   // value before updates, then after each M-step
  std::vector<bool> starved;            // components whose total responsibility underflowed
};

// Mixture log likelihood of a cloud under N equal-weight isotropic Gaussians
// at X plus a uniform outlier component of weight mu over the S points:
//   L = sum_s log( (1-mu)/N sum_n Normal(y_s; x_n, sigma2 I) + mu / S ).
double log_likelihood(const PointCloud& cloud, const Points& keypoints, double sigma2, double mu);

// EM on the mixture: the E-step assigns responsibilities over N+1 components,
// the M-step moves each centroid to its responsibility-weighted cloud mean and
// refits the shared variance. Stops on relative tolerance or max_iters.
EmResult em_fit(const PointCloud& cloud, const Points& initial, const GmmConfig& config);

// E-step responsibilities, (N+1) x S; row N is the outlier component. Each
// column sums to 1. Exposed for the property tests.
Eigen::MatrixXd responsibilities(const PointCloud& cloud, const Points& keypoints, double sigma2,
                                 double mu);

}  // namespace cablelab::perception
