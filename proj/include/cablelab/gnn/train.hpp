#pragma once

#include "cablelab/gnn/model.hpp"
#include "cablelab/nn/adam.hpp"
#include "cablelab/types.hpp"

#include <cstdint>
#include <vector>

namespace cablelab::gnn {

// One supervised sample: m+1 states (oldest first), the control applied at
// the newest state, and the resulting key-point velocity.
struct Transition {
  std::vector<Points> window;
  ControlInput control;
  Points target;  // 2 x N, (X(t+1) - X(t)) / dt
};

struct Dataset {
  std::vector<Transition> transitions;
  int n_keypoints = 0;
  double dt = 1.0;
};

// Expands trajectories into transitions; histories shorter than m+1 at the
// start of an episode are padded by replicating the first state.
Dataset build_dataset(const std::vector<Trajectory>& trajectories, int window, double dt);

struct TrainConfig {
  int epochs = 3;
  int ae_epochs = 2;
  double lr_start = 1e-4;
  double lr_end = 1e-6;
  std::uint64_t seed = 0;
  double noise_std = 0.0;  // optional position jitter on the input window
  double grad_clip = 1.0;  // global-norm gradient clip; 0 disables
  int log_every = 0;       // 0 silences progress output
};

struct AutoencoderResult {
  nn::Mlp phi_v, psi_v;  // vertex feature -> latent -> vertex feature
  nn::Mlp phi_e, psi_e;
  nn::Normalizer vertex_norm, edge_norm;
  double vertex_loss = 0.0;  // final mean reconstruction MSE, normalized units
  double edge_loss = 0.0;
};

// Minimizes the two reconstruction losses over the graph snapshots of the
// dataset, one transition per optimizer step.
AutoencoderResult train_autoencoders(const Dataset& data, const GnnArch& arch,
                                     const TrainConfig& cfg);

struct TrainReport {
  std::vector<double> epoch_loss;   // mean one-step training MSE, normalized
  double val_mse = 0.0;             // denormalized one-step MSE on held-out data, m^2/s^2
  double val_rmse_m = 0.0;          // per-coordinate RMSE over one step, m (at the dataset dt)
};

// Seeds the encoders (and the hidden decoder layers) from the autoencoders,
// then trains the full prediction path end to end on one-step velocities.
GnnModel train_dynamics(const Dataset& train, const Dataset& val, const AutoencoderResult& ae,
                        const GnnArch& arch, const TrainConfig& cfg, TrainReport* report = nullptr);

// Continues training an existing model on new data (keeps its normalizers).
void fine_tune(GnnModel& model, const Dataset& data, const TrainConfig& cfg);

// Flat-input baseline: the stacked window positions and controls through one
// MLP predicting all key-point velocities at once.
struct MlpBaseline {
  nn::Mlp net;
  nn::Normalizer input_norm, target_norm;
  int window = 5;
  bool trained = false;
};

MlpBaseline train_mlp_baseline(const Dataset& train, const TrainConfig& cfg, int hidden_width = 128,
                               int hidden_layers = 2);

Points predict_mlp(const MlpBaseline& baseline, const std::vector<Points>& history,
                   const ControlInput& control);

std::vector<Points> rollout_mlp(const MlpBaseline& baseline, std::vector<Points> history,
                                const std::vector<ControlInput>& controls, double dt, int steps);

}  // namespace cablelab::gnn
