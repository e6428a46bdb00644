#pragma once

#include "cablelab/gnn/graph.hpp"
#include "cablelab/nn/mlp.hpp"
#include "cablelab/nn/normalizer.hpp"
#include "cablelab/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cablelab::gnn {

struct GnnArch {
  int window = 5;            // m; the dynamics sees m+1 states
  int message_passing = 10;  // k
  double radius = 0.2;       // connective radius, meters
  int hidden_width = 128;
  int hidden_layers = 2;
  int latent_width = 32;     // L_v = L_e
  int n_keypoints = 13;

  int vertex_feature_width() const { return 2 * (window + 1) + 3; }
  static constexpr int edge_feature_width() { return 3; }
  std::vector<int> mlp_widths(int in, int out) const;
};

// Encode -> k message-passing blocks -> decode. Encoders/decoders come from
// the pretrained autoencoders; the vertex decoder head is re-sized to emit
// per-vertex 2D velocities during dynamics training.
struct GnnModel {
  GnnArch arch;
  nn::Mlp phi_v, phi_e;    // encoders
  nn::Mlp psi_v;           // dynamics decoder, latent -> 2
  nn::Mlp psi_e;           // edge autoencoder decoder, kept for reconstruction
  nn::Mlp f_v, f_e;        // processor nets, shared across the k passes
  nn::Normalizer vertex_norm, edge_norm, target_norm;
  bool trained = false;

  static GnnModel init(const GnnArch& arch, std::uint64_t seed);
  Eigen::Index n_dynamic_params() const;  // everything in the prediction path
  Eigen::VectorXd dynamic_params() const;
  void set_dynamic_params(const Eigen::VectorXd& flat);
};

struct LatentGraph {
  Eigen::MatrixXd v;  // L_v x N
  Eigen::MatrixXd e;  // L_e x E
  std::vector<std::pair<int, int>> edges;
};

// One message-passing block per the update
//   e'_ij <- e'_ij + f_e(e'_ij, v'_i, v'_j)
//   v'_i  <- v'_i  + f_v(v'_i, sum_j e'_ij)
// with both right-hand sides read at the incoming level and a fixed edge
// summation order.
LatentGraph process(const LatentGraph& latent, const GnnModel& model);

// Everything recorded during predict() that the reverse pass needs.
struct GnnTape {
  GraphSnapshot graph;                     // raw features
  Eigen::MatrixXd vfeat_n, efeat_n;        // normalized features
  nn::MlpTape enc_v, enc_e, dec;
  std::vector<nn::MlpTape> fe_tapes, fv_tapes;
  std::vector<Eigen::MatrixXd> v_levels, e_levels;  // latents, k+1 levels
  Eigen::MatrixXd out_normed;              // 2 x N
};

// Predicted key-point velocities (2 x N, m/s), denormalized.
Points predict(const GnnModel& model, const std::vector<Points>& history,
               const ControlInput& control, GnnTape* tape = nullptr);

struct GnnParamGrads {
  nn::MlpGrads phi_v, phi_e, psi_v, f_v, f_e;
  static GnnParamGrads zeros_like(const GnnModel& model);
  Eigen::VectorXd to_flat() const;  // matches GnnModel::dynamic_params order
};

struct GnnInputGrads {
  std::vector<Points> d_history;  // m+1 gradients, oldest first (same order as input)
  Eigen::VectorXd d_control;      // 3Q
};

// Reverse-mode chaining from an output cotangent (in m/s units) back to the
// input history positions and control slots. Parameter gradients accumulate
// into *param_grads when given.
GnnInputGrads vjp(const GnnModel& model, const GnnTape& tape, const Points& d_out,
                  GnnParamGrads* param_grads);

// Autoregressive rollout: X(t+1) = X(t) + pred * dt, history window shifted
// with the predictions. Returns the predicted states (steps entries, not
// counting the seed history). Throws on divergence (any |coordinate| > 10 m)
// naming the step.
std::vector<Points> rollout_model(const GnnModel& model, std::vector<Points> history,
                                  const std::vector<ControlInput>& controls, double dt, int steps);

}  // namespace cablelab::gnn
