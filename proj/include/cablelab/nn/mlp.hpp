#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace cablelab::nn {

// Feed-forward net: affine layers with ReLU on hidden layers and identity on
// the output. 64-bit parameters throughout. Forward/backward operate on
// column batches so graph-sized batches run as GEMMs.
struct Mlp {
  std::vector<int> widths;            // [in, hidden..., out]
  std::vector<Eigen::MatrixXd> W;     // W[l] is widths[l+1] x widths[l]
  std::vector<Eigen::VectorXd> b;

  static Mlp he_uniform(const std::vector<int>& widths, std::uint64_t seed);
  static Mlp zeros(const std::vector<int>& widths);

  int layers() const { return static_cast<int>(W.size()); }
  int in_width() const { return widths.front(); }
  int out_width() const { return widths.back(); }
  Eigen::Index n_params() const;
  bool finite() const;

  // Flat parameter block, layer order [W0, b0, W1, b1, ...], column-major.
  Eigen::VectorXd to_flat() const;
  void from_flat(const Eigen::Ref<const Eigen::VectorXd>& flat);
};

// Cached activations from a forward pass, consumed by backward().
struct MlpTape {
  std::vector<Eigen::MatrixXd> acts;  // acts[0] = input, acts[l+1] = layer l output
};

// Columns of x are independent samples. Fills the tape when given.
Eigen::MatrixXd forward(const Mlp& mlp, const Eigen::MatrixXd& x, MlpTape* tape = nullptr);

struct MlpGrads {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;

  static MlpGrads zeros_like(const Mlp& mlp);
  Eigen::VectorXd to_flat() const;
};

// Reverse-mode pass. Accumulates parameter gradients into `grads` (so nets
// shared across several applications sum naturally) and returns the gradient
// with respect to the input batch.
Eigen::MatrixXd backward(const Mlp& mlp, const MlpTape& tape, const Eigen::MatrixXd& out_grad,
                         MlpGrads& grads);

// Input gradient only; skips the parameter-gradient GEMMs. Used by the
// controller, which differentiates with respect to inputs alone.
Eigen::MatrixXd backward_input_only(const Mlp& mlp, const MlpTape& tape,
                                    const Eigen::MatrixXd& out_grad);

}  // namespace cablelab::nn
