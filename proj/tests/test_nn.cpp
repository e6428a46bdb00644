#include "cablelab/nn/adam.hpp"
#include "cablelab/nn/mlp.hpp"
#include "cablelab/nn/normalizer.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cablelab;
using namespace cablelab::nn;

namespace {

// Independent hand-rolled forward pass: plain loops, no Eigen products.
std::vector<double> naive_forward(const Mlp& mlp, const std::vector<double>& input) {
  std::vector<double> h = input;
  for (int l = 0; l < mlp.layers(); ++l) {
    std::vector<double> next(static_cast<std::size_t>(mlp.widths[static_cast<std::size_t>(l) + 1]), 0.0);
    for (std::size_t i = 0; i < next.size(); ++i) {
      double acc = mlp.b[static_cast<std::size_t>(l)](static_cast<Eigen::Index>(i));
      for (std::size_t j = 0; j < h.size(); ++j)
        acc += mlp.W[static_cast<std::size_t>(l)](static_cast<Eigen::Index>(i),
                                                  static_cast<Eigen::Index>(j)) *
               h[j];
      next[i] = (l + 1 < mlp.layers() && acc < 0.0) ? 0.0 : acc;
    }
    h = std::move(next);
  }
  return h;
}

// Central finite differences on the scalar loss sum(out ⊙ cotangent).
bool gradient_matches_fd(const Mlp& mlp, const Eigen::VectorXd& x, double tol) {
  MlpTape tape;
  const Eigen::MatrixXd out = forward(mlp, x, &tape);
  Eigen::MatrixXd cot = Eigen::MatrixXd::Ones(out.rows(), out.cols());
  MlpGrads grads = MlpGrads::zeros_like(mlp);
  const Eigen::MatrixXd dx = backward(mlp, tape, cot, grads);

  const double h = 1e-5;
  Mlp probe = mlp;
  Eigen::VectorXd flat = mlp.to_flat();
  const Eigen::VectorXd gflat = grads.to_flat();
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    Eigen::VectorXd fp = flat, fn = flat;
    fp[i] += h;
    fn[i] -= h;
    probe.from_flat(fp);
    const double lp = forward(probe, x).sum();
    probe.from_flat(fn);
    const double ln = forward(probe, x).sum();
    const double fd = (lp - ln) / (2.0 * h);
    if (std::abs(fd - gflat[i]) > tol * std::max({1.0, std::abs(fd), std::abs(gflat[i])}))
      return false;
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xn = x;
    xp[i] += h;
    xn[i] -= h;
    const double fd = (forward(mlp, xp).sum() - forward(mlp, xn).sum()) / (2.0 * h);
    if (std::abs(fd - dx(i, 0)) > tol * std::max({1.0, std::abs(fd), std::abs(dx(i, 0))}))
      return false;
  }
  return true;
}

// Rejects inputs that park a pre-activation on the ReLU kink, where finite
// differences are meaningless.
bool safely_away_from_kinks(const Mlp& mlp, const Eigen::VectorXd& x) {
  Eigen::MatrixXd h = x;
  for (int l = 0; l + 1 < mlp.layers(); ++l) {
    h = (mlp.W[static_cast<std::size_t>(l)] * h).colwise() + mlp.b[static_cast<std::size_t>(l)];
    if (h.cwiseAbs().minCoeff() < 1e-3) return false;
    h = h.cwiseMax(0.0);
  }
  return true;
}

}  // namespace

TEST_CASE("forward closed forms") {
  SUBCASE("zero parameters, zero output") {
    const Mlp mlp = Mlp::zeros({4, 3, 2});
    CHECK(forward(mlp, Eigen::VectorXd::Random(4)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("identity single layer") {
    Mlp mlp = Mlp::zeros({3, 3});
    mlp.W[0] = Eigen::MatrixXd::Identity(3, 3);
    const Eigen::VectorXd x = Eigen::Vector3d(0.3, -1.2, 4.0);
    CHECK((forward(mlp, x) - x).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("matches a naive loop implementation") {
    const Mlp mlp = Mlp::he_uniform({3, 5, 2}, 77);
    const Eigen::Vector3d x(0.5, -0.25, 1.5);
    const auto ref = naive_forward(mlp, {0.5, -0.25, 1.5});
    const Eigen::MatrixXd got = forward(mlp, x);
    for (int i = 0; i < 2; ++i) CHECK(got(i, 0) == doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-12));
  }
  SUBCASE("shape mismatch throws") {
    const Mlp mlp = Mlp::zeros({4, 2});
    CHECK_THROWS_AS(forward(mlp, Eigen::VectorXd::Zero(3)), std::invalid_argument);
  }
}

TEST_CASE("backward gradients") {
  SUBCASE("zero cotangent, zero gradients") {
    const Mlp mlp = Mlp::he_uniform({3, 4, 2}, 5);
    MlpTape tape;
    forward(mlp, Eigen::VectorXd::Random(3), &tape);
    MlpGrads g = MlpGrads::zeros_like(mlp);
    const Eigen::MatrixXd dx = backward(mlp, tape, Eigen::MatrixXd::Zero(2, 1), g);
    CHECK(dx.cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.to_flat().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("linear net input gradient is W^T g") {
    const Mlp mlp = Mlp::he_uniform({4, 3}, 6);
    MlpTape tape;
    forward(mlp, Eigen::VectorXd::Random(4), &tape);
    MlpGrads g = MlpGrads::zeros_like(mlp);
    const Eigen::VectorXd cot = Eigen::Vector3d(1.0, -2.0, 0.5);
    const Eigen::MatrixXd dx = backward(mlp, tape, cot, g);
    CHECK((dx - mlp.W[0].transpose() * cot).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("finite-difference property over random small architectures") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> width(1, 16), depth(1, 3);
    int checked = 0;
    for (int trial = 0; checked < 12 && trial < 400; ++trial) {
      std::vector<int> widths{width(rng)};
      const int d = depth(rng);
      for (int l = 0; l < d; ++l) widths.push_back(width(rng));
      const Mlp mlp = Mlp::he_uniform(widths, rng());
      Eigen::VectorXd x(widths.front());
      for (Eigen::Index i = 0; i < x.size(); ++i)
        x[i] = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
      if (!safely_away_from_kinks(mlp, x)) continue;
      CHECK(gradient_matches_fd(mlp, x, 1e-6));
      ++checked;
    }
    CHECK(checked == 12);
  }
  SUBCASE("batched columns accumulate like separate samples") {
    const Mlp mlp = Mlp::he_uniform({3, 8, 2}, 9);
    Eigen::MatrixXd xb = Eigen::MatrixXd::Random(3, 5);
    MlpTape tb;
    forward(mlp, xb, &tb);
    MlpGrads gb = MlpGrads::zeros_like(mlp);
    backward(mlp, tb, Eigen::MatrixXd::Ones(2, 5), gb);

    MlpGrads gs = MlpGrads::zeros_like(mlp);
    for (int c = 0; c < 5; ++c) {
      MlpTape t1;
      forward(mlp, xb.col(c), &t1);
      backward(mlp, t1, Eigen::MatrixXd::Ones(2, 1), gs);
    }
    CHECK((gb.to_flat() - gs.to_flat()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradients leave parameters, advance the schedule") {
    AdamConfig cfg;
    cfg.schedule_steps = 10;
    OptimizerState opt(4, cfg);
    Eigen::VectorXd p = Eigen::VectorXd::Constant(4, 1.5);
    const Eigen::VectorXd before = p;
    adam_step(opt, p, Eigen::VectorXd::Zero(4));
    CHECK((p - before).cwiseAbs().maxCoeff() == 0.0);
    CHECK(opt.step == 1);
    CHECK(opt.current_lr() < cfg.lr_start);
  }
  SUBCASE("first step moves by about the learning rate") {
    AdamConfig cfg;
    cfg.lr_start = cfg.lr_end = 1e-4;
    OptimizerState opt(1, cfg);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(1);
    adam_step(opt, p, Eigen::VectorXd::Ones(1));
    CHECK(p[0] == doctest::Approx(-1e-4).epsilon(1e-6));
  }
  SUBCASE("deterministic") {
    AdamConfig cfg;
    OptimizerState o1(3, cfg), o2(3, cfg);
    Eigen::VectorXd p1 = Eigen::Vector3d(1, 2, 3), p2 = p1;
    const Eigen::VectorXd g = Eigen::Vector3d(0.1, -0.2, 0.3);
    for (int i = 0; i < 5; ++i) {
      adam_step(o1, p1, g);
      adam_step(o2, p2, g);
    }
    CHECK((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("non-finite gradient names the index") {
    AdamConfig cfg;
    OptimizerState opt(3, cfg);
    Eigen::VectorXd p = Eigen::Vector3d::Zero();
    Eigen::VectorXd g = Eigen::Vector3d::Zero();
    g[2] = std::nan("");
    CHECK_THROWS_WITH_AS(adam_step(opt, p, g), doctest::Contains("index 2"), std::runtime_error);
  }
}

TEST_CASE("training a tiny regression strictly decreases the loss") {
  std::mt19937_64 rng(31);
  Eigen::MatrixXd xs = Eigen::MatrixXd::Random(2, 16);
  Eigen::MatrixXd ys(1, 16);
  for (int i = 0; i < 16; ++i) ys(0, i) = std::sin(xs(0, i)) - 0.5 * xs(1, i);

  Mlp net = Mlp::he_uniform({2, 16, 1}, 8);
  AdamConfig cfg;
  cfg.lr_start = cfg.lr_end = 1e-2;
  Eigen::VectorXd flat = net.to_flat();
  OptimizerState opt(flat.size(), cfg);

  const auto loss = [&] { return (forward(net, xs) - ys).squaredNorm() / 16.0; };
  const double before = loss();
  for (int it = 0; it < 100; ++it) {
    MlpTape tape;
    const Eigen::MatrixXd out = forward(net, xs, &tape);
    MlpGrads g = MlpGrads::zeros_like(net);
    backward(net, tape, (2.0 / 16.0) * (out - ys), g);
    adam_step(opt, flat, g.to_flat());
    net.from_flat(flat);
  }
  CHECK(loss() < before);
}

TEST_CASE("normalizer round trip and gradient scaling") {
  Eigen::MatrixXd samples = Eigen::MatrixXd::Random(4, 50);
  samples.row(2).setConstant(3.0);  // constant feature
  const Normalizer n = Normalizer::fit(samples);
  const Eigen::MatrixXd z = n.apply(samples);
  CHECK(z.row(0).mean() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((n.invert(z) - samples).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(n.std[2] == doctest::Approx(1e-8));  // floored, no division blow-up
}
