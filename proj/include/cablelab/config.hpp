#pragma once

#include "cablelab/gnn/model.hpp"
#include "cablelab/gnn/train.hpp"
#include "cablelab/mpc/task.hpp"
#include "cablelab/perception/gmm.hpp"
#include "cablelab/sim/cable.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cablelab {

// Raised for malformed files, unknown keys, or bad values; the CLI maps it to
// exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat `section.key = value` configuration. Every key has a default matching
// the reference parameter table; unknown keys are rejected.
struct RunConfig {
  sim::CableParams cable;

  struct {
    int window = 5;
    int message_passing = 10;
    double radius = 0.2;
    int hidden_layers = 2;
    int hidden_width = 128;
    int latent_width = 32;
  } gnn;

  struct {
    int batch_size = 1;
    double lr_start = 1e-4;
    double lr_end = 1e-6;
    int epochs = 3;
    int ae_epochs = 2;
    double noise_std = 0.0;
  } train;

  mpc::MpcConfig mpc;

  struct {
    int warmup_steps = 6;
    double warmup_speed = 0.02;
  } task;

  struct {
    double mu = 0.1;
    double sigma2_init = 1e-4;
    int max_iters = 50;
    double tol = 1e-6;
    int pts_per_segment = 20;
    double noise_sigma = 0.005;
    double outlier_ratio = 0.1;
  } gmm;

  struct {
    int trajectories = 200;
    int steps = 60;
    double max_speed = 0.05;
    int val_trajectories = 10;
    bool domain_randomization = false;
  } data;

  struct {
    int seeds = 5;
    std::vector<std::string> scenarios{"U", "S", "Z"};
    std::vector<double> scales{0.1, 0.5, 1.0, 2.0, 3.0};
    std::vector<std::string> modes{"direct", "servo", "hybrid", "finetune", "domrand"};
    int finetune_transitions = 2000;
    int finetune_epochs = 1;
    int threads = 0;  // 0 = hardware concurrency
  } bench;

  struct {
    std::uint64_t seed = 0;
    std::string out_dir = "out";
  } run;

  // Derived views.
  gnn::GnnArch gnn_arch() const;
  gnn::TrainConfig train_config(std::uint64_t seed) const;
  mpc::TaskConfig task_config() const;
  perception::GmmConfig gmm_config() const;

  // Restores the reference-table experiment sizes (10k trajectories of 200
  // steps); call sites print a runtime warning.
  void apply_paper_scale();
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

}  // namespace cablelab
