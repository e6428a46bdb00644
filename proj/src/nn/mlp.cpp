#include "cablelab/nn/mlp.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace cablelab::nn {

namespace {

void check_widths(const std::vector<int>& widths) {
  if (widths.size() < 2) throw std::invalid_argument("mlp needs at least one layer");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("mlp widths must be positive");
}

}  // namespace

Mlp Mlp::he_uniform(const std::vector<int>& widths, std::uint64_t seed) {
  check_widths(widths);
  std::mt19937_64 rng(seed);
  Mlp mlp;
  mlp.widths = widths;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l], fan_out = widths[l + 1];
    const double limit = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> u(-limit, limit);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int j = 0; j < fan_in; ++j)
      for (int i = 0; i < fan_out; ++i) w(i, j) = u(rng);
    mlp.W.push_back(std::move(w));
    mlp.b.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return mlp;
}

Mlp Mlp::zeros(const std::vector<int>& widths) {
  check_widths(widths);
  Mlp mlp;
  mlp.widths = widths;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    mlp.W.push_back(Eigen::MatrixXd::Zero(widths[l + 1], widths[l]));
    mlp.b.push_back(Eigen::VectorXd::Zero(widths[l + 1]));
  }
  return mlp;
}

Eigen::Index Mlp::n_params() const {
  Eigen::Index n = 0;
  for (int l = 0; l < layers(); ++l) n += W[l].size() + b[l].size();
  return n;
}

bool Mlp::finite() const {
  for (int l = 0; l < layers(); ++l)
    if (!W[l].allFinite() || !b[l].allFinite()) return false;
  return true;
}

Eigen::VectorXd Mlp::to_flat() const {
  Eigen::VectorXd flat(n_params());
  Eigen::Index at = 0;
  for (int l = 0; l < layers(); ++l) {
    flat.segment(at, W[l].size()) = Eigen::Map<const Eigen::VectorXd>(W[l].data(), W[l].size());
    at += W[l].size();
    flat.segment(at, b[l].size()) = b[l];
    at += b[l].size();
  }
  return flat;
}

void Mlp::from_flat(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (flat.size() != n_params()) throw std::invalid_argument("parameter block size mismatch");
  Eigen::Index at = 0;
  for (int l = 0; l < layers(); ++l) {
    Eigen::Map<Eigen::VectorXd>(W[l].data(), W[l].size()) = flat.segment(at, W[l].size());
    at += W[l].size();
    b[l] = flat.segment(at, b[l].size());
    at += b[l].size();
  }
}

Eigen::MatrixXd forward(const Mlp& mlp, const Eigen::MatrixXd& x, MlpTape* tape) {
  if (x.rows() != mlp.in_width())
    throw std::invalid_argument("mlp input has " + std::to_string(x.rows()) +
                                " rows, expected " + std::to_string(mlp.in_width()));
  if (tape) {
    tape->acts.clear();
    tape->acts.push_back(x);
  }
  Eigen::MatrixXd h = x;
  for (int l = 0; l < mlp.layers(); ++l) {
    h = (mlp.W[l] * h).colwise() + mlp.b[l];
    if (l + 1 < mlp.layers()) h = h.cwiseMax(0.0);  // ReLU on hidden layers
    if (tape) tape->acts.push_back(h);
  }
  return h;
}

MlpGrads MlpGrads::zeros_like(const Mlp& mlp) {
  MlpGrads g;
  for (int l = 0; l < mlp.layers(); ++l) {
    g.dW.push_back(Eigen::MatrixXd::Zero(mlp.W[l].rows(), mlp.W[l].cols()));
    g.db.push_back(Eigen::VectorXd::Zero(mlp.b[l].size()));
  }
  return g;
}

Eigen::VectorXd MlpGrads::to_flat() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < dW.size(); ++l) n += dW[l].size() + db[l].size();
  Eigen::VectorXd flat(n);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < dW.size(); ++l) {
    flat.segment(at, dW[l].size()) = Eigen::Map<const Eigen::VectorXd>(dW[l].data(), dW[l].size());
    at += dW[l].size();
    flat.segment(at, db[l].size()) = db[l];
    at += db[l].size();
  }
  return flat;
}

Eigen::MatrixXd backward_input_only(const Mlp& mlp, const MlpTape& tape,
                                    const Eigen::MatrixXd& out_grad) {
  if (static_cast<int>(tape.acts.size()) != mlp.layers() + 1)
    throw std::invalid_argument("tape does not match network depth");
  Eigen::MatrixXd delta = out_grad;
  for (int l = mlp.layers() - 1; l >= 0; --l) {
    if (l + 1 < mlp.layers()) {
      delta = (tape.acts[static_cast<std::size_t>(l + 1)].array() > 0.0)
                  .select(delta.array(), 0.0)
                  .matrix();
    }
    delta = (mlp.W[static_cast<std::size_t>(l)].transpose() * delta).eval();
  }
  return delta;
}

Eigen::MatrixXd backward(const Mlp& mlp, const MlpTape& tape, const Eigen::MatrixXd& out_grad,
                         MlpGrads& grads) {
  if (static_cast<int>(tape.acts.size()) != mlp.layers() + 1)
    throw std::invalid_argument("tape does not match network depth");
  if (out_grad.rows() != mlp.out_width() || out_grad.cols() != tape.acts.back().cols())
    throw std::invalid_argument("output gradient shape mismatch");

  Eigen::MatrixXd delta = out_grad;
  for (int l = mlp.layers() - 1; l >= 0; --l) {
    if (l + 1 < mlp.layers()) {
      // Post-activation equals zero exactly where ReLU clipped.
      delta = (tape.acts[static_cast<std::size_t>(l + 1)].array() > 0.0)
                  .select(delta.array(), 0.0)
                  .matrix();
    }
    grads.dW[static_cast<std::size_t>(l)].noalias() +=
        delta * tape.acts[static_cast<std::size_t>(l)].transpose();
    grads.db[static_cast<std::size_t>(l)] += delta.rowwise().sum();
    if (l > 0) delta = (mlp.W[static_cast<std::size_t>(l)].transpose() * delta).eval();
  }
  return mlp.W[0].transpose() * delta;
}

}  // namespace cablelab::nn
