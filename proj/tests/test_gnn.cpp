#include "cablelab/gnn/graph.hpp"
#include "cablelab/gnn/model.hpp"
#include "cablelab/gnn/train.hpp"
#include "cablelab/sim/cable.hpp"
#include "cablelab/sim/policy.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace cablelab;
using namespace cablelab::gnn;

namespace {

std::vector<Points> straight_history(int m1, int n = 13) {
  const Points kp = sim::make_cable(sim::CableParams{}).keypoints;
  (void)n;
  return std::vector<Points>(static_cast<std::size_t>(m1), kp);
}

GnnArch small_arch() {
  GnnArch a;
  a.window = 2;
  a.message_passing = 2;
  a.hidden_width = 16;
  a.latent_width = 8;
  return a;
}

// init() zeroes the processor heads (identity passes); give them weight so
// structural properties exercise real message flow.
GnnModel live_model(const GnnArch& arch, std::uint64_t seed) {
  GnnModel m = GnnModel::init(arch, seed);
  m.f_v.W.back() = 0.3 * Eigen::MatrixXd::Random(m.f_v.W.back().rows(), m.f_v.W.back().cols());
  m.f_e.W.back() = 0.3 * Eigen::MatrixXd::Random(m.f_e.W.back().rows(), m.f_e.W.back().cols());
  return m;
}

// Exploration data on a small cable for the training smoke tests.
Dataset tiny_dataset(int trajectories, int steps, std::uint64_t seed, int window) {
  const sim::Cable cable{sim::CableParams{}};
  std::vector<Trajectory> trajs;
  for (int i = 0; i < trajectories; ++i) {
    const auto controls = sim::random_policy(seed + 31 * i, steps, 0.05);
    trajs.push_back(cable.rollout(cable.initial_state(), controls, 1.0));
  }
  return build_dataset(trajs, window, 1.0);
}

}  // namespace

TEST_CASE("build_graph geometry and features") {
  const auto history = straight_history(6);

  SUBCASE("interior vertices connect two hops each way at radius 0.2") {
    const GraphSnapshot g = build_graph(history, ControlInput(2), 0.2);
    REQUIRE(g.n() == 13);
    std::vector<int> degree(13, 0);
    for (const auto& [i, j] : g.edges) {
      CHECK(i != j);
      ++degree[static_cast<std::size_t>(i)];
      // Symmetry: the reverse edge exists.
      CHECK(std::count(g.edges.begin(), g.edges.end(), std::make_pair(j, i)) == 1);
    }
    for (int v = 2; v <= 10; ++v) CHECK(degree[static_cast<std::size_t>(v)] == 4);
    CHECK(degree[0] == 2);
    CHECK(degree[12] == 2);
  }
  SUBCASE("radius below the spacing yields no edges") {
    const GraphSnapshot g = build_graph(history, ControlInput(2), 0.05);
    CHECK(g.e() == 0);
  }
  SUBCASE("control slots only on the grasped ends") {
    ControlInput u(2);
    u.robots[0] = Eigen::Vector3d(1, 2, 3);
    u.robots[1] = Eigen::Vector3d(4, 5, 6);
    const GraphSnapshot g = build_graph(history, u, 0.2);
    const int base = 2 * 6;
    CHECK(g.vertex_features(base + 0, 0) == 1.0);
    CHECK(g.vertex_features(base + 2, 0) == 3.0);
    CHECK(g.vertex_features(base + 1, 12) == 5.0);
    for (int v = 1; v < 12; ++v)
      CHECK(g.vertex_features.block<3, 1>(base, v).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("zero control leaves every slot zero") {
    const GraphSnapshot g = build_graph(history, ControlInput(2), 0.2);
    CHECK(g.vertex_features.bottomRows(3).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("inconsistent keypoint counts are rejected") {
    auto bad = history;
    bad.back() = Points::Zero(2, 7);
    CHECK_THROWS_AS(build_graph(bad, ControlInput(2), 0.2), std::invalid_argument);
  }
  SUBCASE("edge features are relative displacement and its norm") {
    const GraphSnapshot g = build_graph(history, ControlInput(2), 0.2);
    for (int k = 0; k < g.e(); ++k) {
      const auto [i, j] = g.edges[static_cast<std::size_t>(k)];
      const Vec2 d = history.back().col(i) - history.back().col(j);
      CHECK(g.edge_features(0, k) == doctest::Approx(d.x()));
      CHECK(g.edge_features(2, k) == doctest::Approx(d.norm()));
    }
  }
}

TEST_CASE("process semantics") {
  const GnnArch arch = small_arch();
  const GnnModel model = live_model(arch, 3);

  SUBCASE("zero-edge graph sees a zero aggregate") {
    LatentGraph lg;
    lg.v = Eigen::MatrixXd::Random(arch.latent_width, 5);
    lg.e = Eigen::MatrixXd::Zero(arch.latent_width, 0);
    const LatentGraph out = process(lg, model);
    Eigen::MatrixXd vin(2 * arch.latent_width, 5);
    vin.topRows(arch.latent_width) = lg.v;
    vin.bottomRows(arch.latent_width).setZero();
    const Eigen::MatrixXd expect = lg.v + forward(model.f_v, vin);
    CHECK((out.v - expect).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("vertex permutation equivariance") {
    LatentGraph lg;
    lg.v = Eigen::MatrixXd::Random(arch.latent_width, 6);
    lg.edges = {{0, 1}, {1, 0}, {1, 2}, {2, 1}, {3, 4}, {4, 3}};
    lg.e = Eigen::MatrixXd::Random(arch.latent_width, 6);
    const LatentGraph out = process(lg, model);

    // Apply a permutation, process, and undo it.
    std::vector<int> perm{3, 0, 5, 1, 4, 2};
    LatentGraph pg;
    pg.v.resize(arch.latent_width, 6);
    for (int i = 0; i < 6; ++i) pg.v.col(perm[static_cast<std::size_t>(i)]) = lg.v.col(i);
    pg.e = lg.e;
    for (const auto& [i, j] : lg.edges)
      pg.edges.emplace_back(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    const LatentGraph pout = process(pg, model);
    for (int i = 0; i < 6; ++i)
      CHECK((pout.v.col(perm[static_cast<std::size_t>(i)]) - out.v.col(i)).cwiseAbs().maxCoeff() <
            1e-12);
  }
}

TEST_CASE("predict and vjp") {
  sim::CableParams params;
  const GnnArch arch = [&] {
    GnnArch a = small_arch();
    a.n_keypoints = params.n_keypoints;
    return a;
  }();
  GnnModel model = live_model(arch, 11);
  const auto history = straight_history(arch.window + 1);

  SUBCASE("zero decoder weights give zero velocities") {
    GnnModel z = model;
    z.psi_v = nn::Mlp::zeros(arch.mlp_widths(arch.latent_width, 2));
    const Points out = predict(z, history, ControlInput(2));
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("translation moves vertex features but not edge features") {
    const GraphSnapshot g0 = build_graph(history, ControlInput(2), arch.radius);
    auto shifted = history;
    for (Points& p : shifted) p.colwise() += Vec2(0.3, -0.2);
    const GraphSnapshot g1 = build_graph(shifted, ControlInput(2), arch.radius);
    CHECK((g1.edge_features - g0.edge_features).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g1.vertex_features - g0.vertex_features).cwiseAbs().maxCoeff() > 0.1);
  }
  SUBCASE("receptive field locality at k = 1") {
    GnnModel local = live_model(arch, 13);
    local.arch.message_passing = 1;
    local.arch.radius = 0.1;  // adjacent-only edges at spacing 1/12
    const Points base_out = predict(local, history, ControlInput(2));

    auto poked = history;
    for (Points& p : poked) p.col(0) += Vec2(0.004, -0.003);  // keeps the edge set identical
    const Points poked_out = predict(local, poked, ControlInput(2));

    // Vertex 3 is three hops away; with one pass its output is untouched.
    CHECK((poked_out.col(3) - base_out.col(3)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((poked_out.col(0) - base_out.col(0)).cwiseAbs().maxCoeff() > 0.0);
    CHECK((poked_out.col(1) - base_out.col(1)).cwiseAbs().maxCoeff() > 0.0);
  }
  SUBCASE("outputs stay finite on random inputs") {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<Points> h;
      for (int i = 0; i <= arch.window; ++i) h.push_back(0.5 * Points::Random(2, 13));
      ControlInput u(2);
      u.robots[0].setRandom();
      u.robots[1].setRandom();
      CHECK(predict(model, h, u).allFinite());
    }
  }
  SUBCASE("vjp matches finite differences through history and control") {
    // Perturb inputs; compare <d_out, predict> directional derivatives.
    GnnTape tape;
    ControlInput u(2);
    u.robots[0] = Eigen::Vector3d(0.01, -0.02, 0.015);
    u.robots[1] = Eigen::Vector3d(-0.012, 0.008, -0.01);
    std::vector<Points> h = history;
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = h[i] + 0.001 * Points::Random(2, 13);

    predict(model, h, u, &tape);
    const Points cot = Points::Random(2, 13);
    const GnnInputGrads ig = vjp(model, tape, cot, nullptr);

    const double fd_h = 1e-6;
    // Direction: random perturbation of every history frame and the control.
    std::vector<Points> dir;
    for (std::size_t i = 0; i < h.size(); ++i) dir.push_back(Points::Random(2, 13));
    Eigen::VectorXd dir_u = Eigen::VectorXd::Random(6);

    auto shifted = [&](double sgn) {
      std::vector<Points> hs = h;
      for (std::size_t i = 0; i < hs.size(); ++i) hs[i] += sgn * fd_h * dir[i];
      ControlInput us = ControlInput::from_flat(u.flat() + sgn * fd_h * dir_u);
      return (cot.array() * predict(model, hs, us).array()).sum();
    };
    const double fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * fd_h);

    double analytic = dir_u.dot(ig.d_control);
    for (std::size_t i = 0; i < h.size(); ++i)
      analytic += (dir[i].array() * ig.d_history[i].array()).sum();
    CHECK(analytic == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("autoencoder training improves reconstruction") {
  const GnnArch arch = [] {
    GnnArch a;
    a.window = 5;
    a.hidden_width = 32;
    a.latent_width = 12;
    return a;
  }();
  const Dataset data = tiny_dataset(4, 40, 7, arch.window);

  TrainConfig cfg;
  cfg.ae_epochs = 4;
  cfg.lr_start = 1e-3;
  cfg.lr_end = 1e-4;
  cfg.seed = 1;
  const AutoencoderResult ae = train_autoencoders(data, arch, cfg);

  // Compare against the untrained reconstruction error.
  const GraphSnapshot g = build_graph(data.transitions.front().window,
                                      data.transitions.front().control, arch.radius);
  const Eigen::MatrixXd vn = ae.vertex_norm.apply(g.vertex_features);
  const int fv = arch.vertex_feature_width();
  const nn::Mlp raw_enc = nn::Mlp::he_uniform(arch.mlp_widths(fv, arch.latent_width), 99);
  const nn::Mlp raw_dec = nn::Mlp::he_uniform(arch.mlp_widths(arch.latent_width, fv), 98);
  const double untrained =
      (forward(raw_dec, forward(raw_enc, vn)) - vn).squaredNorm() / static_cast<double>(vn.size());
  const double trained =
      (forward(ae.psi_v, forward(ae.phi_v, vn)) - vn).squaredNorm() / static_cast<double>(vn.size());
  CHECK(trained < untrained);
  CHECK(ae.vertex_loss < 0.5);
}

TEST_CASE("dynamics training learns and is deterministic") {
  GnnArch arch;
  arch.window = 5;
  arch.hidden_width = 32;
  arch.latent_width = 12;
  arch.message_passing = 3;
  const Dataset train_set = tiny_dataset(6, 40, 21, arch.window);
  const Dataset val_set = tiny_dataset(2, 30, 99, arch.window);

  TrainConfig cfg;
  cfg.ae_epochs = 2;
  cfg.epochs = 5;
  cfg.lr_start = 3e-4;
  cfg.lr_end = 1e-5;
  cfg.seed = 3;
  const AutoencoderResult ae = train_autoencoders(train_set, arch, cfg);

  TrainReport r1, r2;
  const GnnModel m1 = train_dynamics(train_set, val_set, ae, arch, cfg, &r1);
  const GnnModel m2 = train_dynamics(train_set, val_set, ae, arch, cfg, &r2);

  REQUIRE(r1.epoch_loss.size() == 5);
  CHECK(r1.epoch_loss.back() < r1.epoch_loss.front());
  CHECK(m1.trained);
  // Identical seeds, identical parameters.
  CHECK((m1.dynamic_params() - m2.dynamic_params()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r1.val_mse == r2.val_mse);
}

TEST_CASE("shuffled labels plateau near the target variance") {
  GnnArch arch;
  arch.window = 2;
  arch.hidden_width = 16;
  arch.latent_width = 8;
  arch.message_passing = 2;
  Dataset data = tiny_dataset(4, 40, 57, arch.window);

  // Destroy the input-output relation by shuffling targets across samples.
  std::mt19937_64 rng(5);
  std::vector<std::size_t> perm(data.transitions.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Dataset shuffled = data;
  for (std::size_t i = 0; i < perm.size(); ++i)
    shuffled.transitions[i].target = data.transitions[perm[i]].target;

  TrainConfig cfg;
  cfg.ae_epochs = 1;
  cfg.epochs = 4;
  cfg.lr_start = 3e-4;
  cfg.lr_end = 1e-4;
  cfg.seed = 4;
  const AutoencoderResult ae = train_autoencoders(shuffled, arch, cfg);
  TrainReport report;
  train_dynamics(shuffled, {}, ae, arch, cfg, &report);
  // Normalized targets have unit variance; an unlearnable mapping cannot go
  // far below it.
  CHECK(report.epoch_loss.back() > 0.5);
}

TEST_CASE("rollout_model composes Euler steps and flags divergence") {
  GnnArch arch = small_arch();
  GnnModel model = live_model(arch, 2);
  const auto history = straight_history(arch.window + 1);
  const std::vector<ControlInput> controls(5, ControlInput(2));

  SUBCASE("one step equals predict + Euler") {
    const Points xdot = predict(model, history, controls[0]);
    const auto states = rollout_model(model, history, controls, 1.0, 1);
    REQUIRE(states.size() == 1);
    CHECK((states[0] - (history.back() + xdot)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("divergence raises with the step index") {
    GnnModel wild = model;
    wild.psi_v.b.back().setConstant(1e6);  // decoder bias blasts the state out
    CHECK_THROWS_WITH_AS(rollout_model(wild, history, controls, 1.0, 3),
                         doctest::Contains("step 0"), std::runtime_error);
  }
}
