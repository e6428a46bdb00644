#include "cablelab/gnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cablelab::gnn {

namespace {

// Streaming per-feature moments for normalizer fitting.
struct Moments {
  Eigen::VectorXd sum, sumsq;
  double count = 0.0;

  explicit Moments(Eigen::Index n) : sum(Eigen::VectorXd::Zero(n)), sumsq(Eigen::VectorXd::Zero(n)) {}

  void add(const Eigen::MatrixXd& cols) {
    sum += cols.rowwise().sum();
    sumsq += cols.cwiseProduct(cols).rowwise().sum();
    count += static_cast<double>(cols.cols());
  }

  nn::Normalizer finish() const {
    if (count < 1.0) throw std::invalid_argument("no samples for normalization");
    nn::Normalizer n;
    n.mean = sum / count;
    n.std = (sumsq / count - n.mean.cwiseProduct(n.mean)).cwiseMax(0.0).cwiseSqrt().cwiseMax(1e-8);
    return n;
  }
};

void clip_gradients(Eigen::VectorXd& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = grads.norm();
  if (norm > max_norm) grads *= max_norm / norm;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

Eigen::VectorXd baseline_input(const std::vector<Points>& window, const ControlInput& control) {
  const Eigen::Index per = window.front().size();
  Eigen::VectorXd in(static_cast<Eigen::Index>(window.size()) * per + 6);
  Eigen::Index at = 0;
  for (const Points& p : window) {
    in.segment(at, per) = flatten(p);
    at += per;
  }
  in.segment<6>(at) = control.flat();
  return in;
}

}  // namespace

Dataset build_dataset(const std::vector<Trajectory>& trajectories, int window, double dt) {
  if (window < 0) throw std::invalid_argument("window must be non-negative");
  Dataset d;
  d.dt = dt;
  for (const Trajectory& traj : trajectories) {
    if (traj.states.size() != traj.controls.size() + 1)
      throw std::invalid_argument("trajectory has mismatched state/control counts");
    if (traj.states.empty()) continue;
    d.n_keypoints = traj.states.front().n();
    for (std::size_t t = 0; t + 1 < traj.states.size(); ++t) {
      Transition tr;
      for (int j = window; j >= 0; --j) {
        const std::size_t idx = (t >= static_cast<std::size_t>(j)) ? t - static_cast<std::size_t>(j) : 0;
        tr.window.push_back(traj.states[idx].keypoints);
      }
      tr.control = traj.controls[t];
      tr.target = (traj.states[t + 1].keypoints - traj.states[t].keypoints) / dt;
      d.transitions.push_back(std::move(tr));
    }
  }
  return d;
}

AutoencoderResult train_autoencoders(const Dataset& data, const GnnArch& arch,
                                     const TrainConfig& cfg) {
  if (data.transitions.empty()) throw std::invalid_argument("empty dataset");

  // Pass 1: feature statistics over every vertex and edge in the data.
  Moments vm(arch.vertex_feature_width()), em(GnnArch::edge_feature_width());
  for (const Transition& tr : data.transitions) {
    const GraphSnapshot g = build_graph(tr.window, tr.control, arch.radius);
    vm.add(g.vertex_features);
    if (g.e() > 0) em.add(g.edge_features);
  }

  AutoencoderResult res;
  res.vertex_norm = vm.finish();
  res.edge_norm = em.finish();
  const int fv = arch.vertex_feature_width();
  const int fe = GnnArch::edge_feature_width();
  res.phi_v = nn::Mlp::he_uniform(arch.mlp_widths(fv, arch.latent_width), cfg.seed + 11);
  res.psi_v = nn::Mlp::he_uniform(arch.mlp_widths(arch.latent_width, fv), cfg.seed + 12);
  res.phi_e = nn::Mlp::he_uniform(arch.mlp_widths(fe, arch.latent_width), cfg.seed + 13);
  res.psi_e = nn::Mlp::he_uniform(arch.mlp_widths(arch.latent_width, fe), cfg.seed + 14);

  const std::int64_t total =
      static_cast<std::int64_t>(cfg.ae_epochs) * static_cast<std::int64_t>(data.transitions.size());
  nn::AdamConfig ac{cfg.lr_start, cfg.lr_end, std::max<std::int64_t>(total, 1)};
  Eigen::VectorXd pv(res.phi_v.n_params() + res.psi_v.n_params());
  pv << res.phi_v.to_flat(), res.psi_v.to_flat();
  Eigen::VectorXd pe(res.phi_e.n_params() + res.psi_e.n_params());
  pe << res.phi_e.to_flat(), res.psi_e.to_flat();
  nn::OptimizerState ov(pv.size(), ac), oe(pe.size(), ac);

  std::mt19937_64 rng(cfg.seed);

  // One transition per optimizer step: each graph's vertices (or edges) form
  // the column batch.
  const double clip = cfg.grad_clip;
  const auto ae_step = [clip](const nn::Mlp& enc, const nn::Mlp& dec, const Eigen::MatrixXd& batch,
                              nn::OptimizerState& opt, Eigen::VectorXd& flat, nn::Mlp& enc_out,
                              nn::Mlp& dec_out) -> double {
    nn::MlpTape te, td;
    const Eigen::MatrixXd z = forward(enc, batch, &te);
    const Eigen::MatrixXd rec = forward(dec, z, &td);
    const Eigen::MatrixXd diff = rec - batch;
    const double loss = diff.squaredNorm() / static_cast<double>(diff.size());

    nn::MlpGrads ge = nn::MlpGrads::zeros_like(enc), gd = nn::MlpGrads::zeros_like(dec);
    const Eigen::MatrixXd d_rec = (2.0 / static_cast<double>(diff.size())) * diff;
    const Eigen::MatrixXd dz = backward(dec, td, d_rec, gd);
    backward(enc, te, dz, ge);

    Eigen::VectorXd grads(flat.size());
    grads << ge.to_flat(), gd.to_flat();
    clip_gradients(grads, clip);
    adam_step(opt, flat, grads);
    enc_out.from_flat(flat.head(enc.n_params()));
    dec_out.from_flat(flat.tail(dec.n_params()));
    return loss;
  };

  for (int epoch = 0; epoch < cfg.ae_epochs; ++epoch) {
    double vloss = 0.0, eloss = 0.0;
    std::size_t eseen = 0;
    for (std::size_t i : shuffled_indices(data.transitions.size(), rng)) {
      const Transition& tr = data.transitions[i];
      const GraphSnapshot g = build_graph(tr.window, tr.control, arch.radius);
      vloss += ae_step(res.phi_v, res.psi_v, res.vertex_norm.apply(g.vertex_features), ov, pv,
                       res.phi_v, res.psi_v);
      if (g.e() > 0) {
        eloss += ae_step(res.phi_e, res.psi_e, res.edge_norm.apply(g.edge_features), oe, pe,
                         res.phi_e, res.psi_e);
        ++eseen;
      }
    }
    res.vertex_loss = vloss / static_cast<double>(data.transitions.size());
    res.edge_loss = eseen ? eloss / static_cast<double>(eseen) : 0.0;
    if (cfg.log_every > 0)
      std::cerr << "[ae] epoch " << epoch + 1 << "/" << cfg.ae_epochs << " vertex " << res.vertex_loss
                << " edge " << res.edge_loss << "\n";
  }
  return res;
}

GnnModel train_dynamics(const Dataset& train, const Dataset& val, const AutoencoderResult& ae,
                        const GnnArch& arch, const TrainConfig& cfg, TrainReport* report) {
  if (train.transitions.empty()) throw std::invalid_argument("empty training dataset");

  GnnModel model = GnnModel::init(arch, cfg.seed + 21);
  model.phi_v = ae.phi_v;
  model.phi_e = ae.phi_e;
  model.psi_e = ae.psi_e;
  model.vertex_norm = ae.vertex_norm;
  model.edge_norm = ae.edge_norm;
  // The dynamics decoder reuses the autoencoder decoder's hidden stack; only
  // the output head is re-sized for the 2D velocity.
  for (int l = 0; l + 1 < model.psi_v.layers(); ++l) {
    model.psi_v.W[static_cast<std::size_t>(l)] = ae.psi_v.W[static_cast<std::size_t>(l)];
    model.psi_v.b[static_cast<std::size_t>(l)] = ae.psi_v.b[static_cast<std::size_t>(l)];
  }

  Moments tm(2);
  for (const Transition& tr : train.transitions) tm.add(tr.target);
  model.target_norm = tm.finish();

  const std::int64_t total =
      static_cast<std::int64_t>(cfg.epochs) * static_cast<std::int64_t>(train.transitions.size());
  nn::AdamConfig ac{cfg.lr_start, cfg.lr_end, std::max<std::int64_t>(total, 1)};
  Eigen::VectorXd flat = model.dynamic_params();
  nn::OptimizerState opt(flat.size(), ac);

  std::mt19937_64 rng(cfg.seed + 31);
  std::normal_distribution<double> jitter(0.0, 1.0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (std::size_t i : shuffled_indices(train.transitions.size(), rng)) {
      const Transition& tr = train.transitions[i];

      std::vector<Points> window = tr.window;
      Points target = tr.target;
      if (cfg.noise_std > 0.0) {
        for (Points& p : window)
          for (int c = 0; c < p.size(); ++c) p.data()[c] += cfg.noise_std * jitter(rng);
        // Keep the one-step endpoint consistent with the jittered input.
        target += (tr.window.back() - window.back()) / train.dt;
      }

      GnnTape tape;
      predict(model, window, tr.control, &tape);
      const Eigen::MatrixXd tn = model.target_norm.apply(target);
      const Eigen::MatrixXd diff = tape.out_normed - tn;
      loss_sum += diff.squaredNorm() / static_cast<double>(diff.size());

      const Eigen::MatrixXd g_normed = (2.0 / static_cast<double>(diff.size())) * diff;
      GnnParamGrads pg = GnnParamGrads::zeros_like(model);
      vjp(model, tape, model.target_norm.grad_to_raw(g_normed), &pg);
      Eigen::VectorXd grads = pg.to_flat();
      clip_gradients(grads, cfg.grad_clip);
      adam_step(opt, flat, grads);
      model.set_dynamic_params(flat);
    }
    const double mean_loss = loss_sum / static_cast<double>(train.transitions.size());
    if (report) report->epoch_loss.push_back(mean_loss);
    if (cfg.log_every > 0)
      std::cerr << "[dyn] epoch " << epoch + 1 << "/" << cfg.epochs << " loss " << mean_loss
                << " lr " << opt.current_lr() << "\n";
  }
  model.trained = true;

  if (report && !val.transitions.empty()) {
    double mse = 0.0;
    for (const Transition& tr : val.transitions) {
      const Points pred = predict(model, tr.window, tr.control);
      mse += (pred - tr.target).squaredNorm() / static_cast<double>(tr.target.size());
    }
    report->val_mse = mse / static_cast<double>(val.transitions.size());
    report->val_rmse_m = std::sqrt(report->val_mse) * val.dt;
  }
  return model;
}

void fine_tune(GnnModel& model, const Dataset& data, const TrainConfig& cfg) {
  if (!model.trained) throw std::invalid_argument("fine_tune needs a trained model");
  if (data.transitions.empty()) throw std::invalid_argument("empty fine-tune dataset");

  const std::int64_t total =
      static_cast<std::int64_t>(cfg.epochs) * static_cast<std::int64_t>(data.transitions.size());
  nn::AdamConfig ac{cfg.lr_start, cfg.lr_end, std::max<std::int64_t>(total, 1)};
  Eigen::VectorXd flat = model.dynamic_params();
  nn::OptimizerState opt(flat.size(), ac);
  std::mt19937_64 rng(cfg.seed + 41);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i : shuffled_indices(data.transitions.size(), rng)) {
      const Transition& tr = data.transitions[i];
      GnnTape tape;
      predict(model, tr.window, tr.control, &tape);
      const Eigen::MatrixXd tn = model.target_norm.apply(tr.target);
      const Eigen::MatrixXd g_normed =
          (2.0 / static_cast<double>(tn.size())) * (tape.out_normed - tn);
      GnnParamGrads pg = GnnParamGrads::zeros_like(model);
      vjp(model, tape, model.target_norm.grad_to_raw(g_normed), &pg);
      Eigen::VectorXd grads = pg.to_flat();
      clip_gradients(grads, cfg.grad_clip);
      adam_step(opt, flat, grads);
      model.set_dynamic_params(flat);
    }
  }
}

MlpBaseline train_mlp_baseline(const Dataset& train, const TrainConfig& cfg, int hidden_width,
                               int hidden_layers) {
  if (train.transitions.empty()) throw std::invalid_argument("empty training dataset");
  const Transition& first = train.transitions.front();
  const int in_width = static_cast<int>(baseline_input(first.window, first.control).size());
  const int out_width = 2 * train.n_keypoints;

  MlpBaseline base;
  base.window = static_cast<int>(first.window.size()) - 1;

  Moments im(in_width), tm(out_width);
  for (const Transition& tr : train.transitions) {
    im.add(baseline_input(tr.window, tr.control));
    tm.add(flatten(tr.target));
  }
  base.input_norm = im.finish();
  base.target_norm = tm.finish();

  std::vector<int> widths{in_width};
  for (int i = 0; i < hidden_layers; ++i) widths.push_back(hidden_width);
  widths.push_back(out_width);
  base.net = nn::Mlp::he_uniform(widths, cfg.seed + 51);

  const std::int64_t total =
      static_cast<std::int64_t>(cfg.epochs) * static_cast<std::int64_t>(train.transitions.size());
  nn::AdamConfig ac{cfg.lr_start, cfg.lr_end, std::max<std::int64_t>(total, 1)};
  Eigen::VectorXd flat = base.net.to_flat();
  nn::OptimizerState opt(flat.size(), ac);
  std::mt19937_64 rng(cfg.seed + 52);
  std::normal_distribution<double> jitter(0.0, 1.0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i : shuffled_indices(train.transitions.size(), rng)) {
      const Transition& tr = train.transitions[i];
      std::vector<Points> window = tr.window;
      Points target = tr.target;
      if (cfg.noise_std > 0.0) {
        for (Points& p : window)
          for (int c = 0; c < p.size(); ++c) p.data()[c] += cfg.noise_std * jitter(rng);
        target += (tr.window.back() - window.back()) / train.dt;
      }
      const Eigen::VectorXd x = base.input_norm.apply(baseline_input(window, tr.control));
      const Eigen::VectorXd t = base.target_norm.apply(flatten(target));
      nn::MlpTape tape;
      const Eigen::VectorXd y = forward(base.net, x, &tape);
      nn::MlpGrads g = nn::MlpGrads::zeros_like(base.net);
      backward(base.net, tape, (2.0 / static_cast<double>(t.size())) * (y - t), g);
      Eigen::VectorXd grads = g.to_flat();
      clip_gradients(grads, cfg.grad_clip);
      adam_step(opt, flat, grads);
      base.net.from_flat(flat);
    }
  }
  base.trained = true;
  return base;
}

Points predict_mlp(const MlpBaseline& baseline, const std::vector<Points>& history,
                   const ControlInput& control) {
  const Eigen::VectorXd x = baseline.input_norm.apply(baseline_input(history, control));
  const Eigen::VectorXd y = baseline.target_norm.invert(forward(baseline.net, x));
  return unflatten(y);
}

std::vector<Points> rollout_mlp(const MlpBaseline& baseline, std::vector<Points> history,
                                const std::vector<ControlInput>& controls, double dt, int steps) {
  if (static_cast<int>(controls.size()) < steps)
    throw std::invalid_argument("not enough controls for the requested steps");
  std::vector<Points> out;
  for (int s = 0; s < steps; ++s) {
    const Points xdot = predict_mlp(baseline, history, controls[static_cast<std::size_t>(s)]);
    Points next = history.back() + dt * xdot;
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > 10.0)
      throw std::runtime_error("baseline rollout diverged at step " + std::to_string(s));
    history.erase(history.begin());
    history.push_back(next);
    out.push_back(std::move(next));
  }
  return out;
}

}  // namespace cablelab::gnn
