#include "cablelab/gnn/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cablelab::gnn {

namespace {

constexpr double kEdgeNormEps = 1e-12;

Eigen::MatrixXd aggregate_edges(const Eigen::MatrixXd& e, const std::vector<std::pair<int, int>>& edges,
                                int n) {
  Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(e.rows(), n);
  for (std::size_t k = 0; k < edges.size(); ++k) agg.col(edges[k].first) += e.col(static_cast<int>(k));
  return agg;
}

}  // namespace

std::vector<int> GnnArch::mlp_widths(int in, int out) const {
  std::vector<int> w{in};
  for (int i = 0; i < hidden_layers; ++i) w.push_back(hidden_width);
  w.push_back(out);
  return w;
}

GnnModel GnnModel::init(const GnnArch& arch, std::uint64_t seed) {
  GnnModel m;
  m.arch = arch;
  const int fv = arch.vertex_feature_width();
  const int fe = GnnArch::edge_feature_width();
  const int lv = arch.latent_width;
  m.phi_v = nn::Mlp::he_uniform(arch.mlp_widths(fv, lv), seed + 1);
  m.phi_e = nn::Mlp::he_uniform(arch.mlp_widths(fe, lv), seed + 2);
  m.psi_v = nn::Mlp::he_uniform(arch.mlp_widths(lv, 2), seed + 3);
  m.psi_e = nn::Mlp::he_uniform(arch.mlp_widths(lv, fe), seed + 4);
  m.f_v = nn::Mlp::he_uniform(arch.mlp_widths(2 * lv, lv), seed + 5);
  m.f_e = nn::Mlp::he_uniform(arch.mlp_widths(3 * lv, lv), seed + 6);
  // The residual message-passing blocks start as the identity: with k blocks
  // stacked, a non-zero head makes activations (and gradients) grow
  // geometrically in k before any training happens.
  m.f_v.W.back().setZero();
  m.f_e.W.back().setZero();
  m.vertex_norm = nn::Normalizer::identity(fv);
  m.edge_norm = nn::Normalizer::identity(fe);
  m.target_norm = nn::Normalizer::identity(2);
  return m;
}

Eigen::Index GnnModel::n_dynamic_params() const {
  return phi_v.n_params() + phi_e.n_params() + f_v.n_params() + f_e.n_params() + psi_v.n_params();
}

Eigen::VectorXd GnnModel::dynamic_params() const {
  Eigen::VectorXd flat(n_dynamic_params());
  Eigen::Index at = 0;
  for (const nn::Mlp* net : {&phi_v, &phi_e, &f_v, &f_e, &psi_v}) {
    flat.segment(at, net->n_params()) = net->to_flat();
    at += net->n_params();
  }
  return flat;
}

void GnnModel::set_dynamic_params(const Eigen::VectorXd& flat) {
  if (flat.size() != n_dynamic_params()) throw std::invalid_argument("dynamic parameter size mismatch");
  Eigen::Index at = 0;
  for (nn::Mlp* net : {&phi_v, &phi_e, &f_v, &f_e, &psi_v}) {
    net->from_flat(flat.segment(at, net->n_params()));
    at += net->n_params();
  }
}

LatentGraph process(const LatentGraph& latent, const GnnModel& model) {
  const int n = static_cast<int>(latent.v.cols());
  const int e = static_cast<int>(latent.e.cols());
  const int lv = static_cast<int>(latent.v.rows());
  const int le = static_cast<int>(latent.e.rows());

  Eigen::MatrixXd e_in(le + 2 * lv, e);
  for (int k = 0; k < e; ++k) {
    const auto [i, j] = latent.edges[static_cast<std::size_t>(k)];
    e_in.col(k) << latent.e.col(k), latent.v.col(i), latent.v.col(j);
  }
  LatentGraph out;
  out.edges = latent.edges;
  out.e = latent.e + forward(model.f_e, e_in);

  Eigen::MatrixXd v_in(2 * lv, n);
  v_in.topRows(lv) = latent.v;
  v_in.bottomRows(lv) = aggregate_edges(latent.e, latent.edges, n);
  out.v = latent.v + forward(model.f_v, v_in);
  return out;
}

Points predict(const GnnModel& model, const std::vector<Points>& history,
               const ControlInput& control, GnnTape* tape) {
  const GraphSnapshot g = build_graph(history, control, model.arch.radius);
  if (g.window() != model.arch.window)
    throw std::invalid_argument("history window does not match model (got " +
                                std::to_string(g.window()) + ", want " +
                                std::to_string(model.arch.window) + ")");
  const int n = g.n(), e = g.e(), lv = model.arch.latent_width;

  GnnTape local;
  GnnTape& t = tape ? *tape : local;
  t.graph = g;
  t.vfeat_n = model.vertex_norm.apply(g.vertex_features);
  t.efeat_n = model.edge_norm.apply(g.edge_features);
  t.fe_tapes.assign(static_cast<std::size_t>(model.arch.message_passing), {});
  t.fv_tapes.assign(static_cast<std::size_t>(model.arch.message_passing), {});
  t.v_levels.clear();
  t.e_levels.clear();

  Eigen::MatrixXd v = forward(model.phi_v, t.vfeat_n, &t.enc_v);
  Eigen::MatrixXd ee = e > 0 ? forward(model.phi_e, t.efeat_n, &t.enc_e)
                             : Eigen::MatrixXd::Zero(lv, 0);
  t.v_levels.push_back(v);
  t.e_levels.push_back(ee);

  for (int pass = 0; pass < model.arch.message_passing; ++pass) {
    Eigen::MatrixXd e_in(3 * lv, e);
    for (int k = 0; k < e; ++k) {
      const auto [i, j] = g.edges[static_cast<std::size_t>(k)];
      e_in.col(k) << ee.col(k), v.col(i), v.col(j);
    }
    Eigen::MatrixXd e_next = ee;
    if (e > 0) e_next += forward(model.f_e, e_in, &t.fe_tapes[static_cast<std::size_t>(pass)]);

    Eigen::MatrixXd v_in(2 * lv, n);
    v_in.topRows(lv) = v;
    v_in.bottomRows(lv) = aggregate_edges(ee, g.edges, n);
    const Eigen::MatrixXd v_next =
        v + forward(model.f_v, v_in, &t.fv_tapes[static_cast<std::size_t>(pass)]);

    v = v_next;
    ee = e_next;
    t.v_levels.push_back(v);
    t.e_levels.push_back(ee);
  }

  t.out_normed = forward(model.psi_v, v, &t.dec);
  return model.target_norm.invert(t.out_normed);
}

GnnParamGrads GnnParamGrads::zeros_like(const GnnModel& model) {
  GnnParamGrads g;
  g.phi_v = nn::MlpGrads::zeros_like(model.phi_v);
  g.phi_e = nn::MlpGrads::zeros_like(model.phi_e);
  g.psi_v = nn::MlpGrads::zeros_like(model.psi_v);
  g.f_v = nn::MlpGrads::zeros_like(model.f_v);
  g.f_e = nn::MlpGrads::zeros_like(model.f_e);
  return g;
}

Eigen::VectorXd GnnParamGrads::to_flat() const {
  const Eigen::VectorXd a = phi_v.to_flat(), b = phi_e.to_flat(), c = f_v.to_flat(),
                        d = f_e.to_flat(), e = psi_v.to_flat();
  Eigen::VectorXd flat(a.size() + b.size() + c.size() + d.size() + e.size());
  flat << a, b, c, d, e;
  return flat;
}

GnnInputGrads vjp(const GnnModel& model, const GnnTape& tape, const Points& d_out,
                  GnnParamGrads* param_grads) {
  const GraphSnapshot& g = tape.graph;
  const int n = g.n(), e = g.e(), lv = model.arch.latent_width;
  const int m1 = model.arch.window + 1;

  const auto back = [&](const nn::Mlp& net, const nn::MlpTape& t, const Eigen::MatrixXd& g,
                        nn::MlpGrads* acc) {
    return acc ? backward(net, t, g, *acc) : backward_input_only(net, t, g);
  };

  // Through the denormalization and the decoder.
  const Eigen::MatrixXd d_out_n = model.target_norm.grad_to_normed(d_out);
  Eigen::MatrixXd dv = back(model.psi_v, tape.dec, d_out_n, param_grads ? &param_grads->psi_v : nullptr);
  Eigen::MatrixXd de = Eigen::MatrixXd::Zero(lv, e);

  // Reverse through the k message-passing blocks. Both updates read the
  // incoming level, so the two halves are independent given (dv, de).
  for (int pass = model.arch.message_passing - 1; pass >= 0; --pass) {
    const Eigen::MatrixXd dv_next = dv;
    const Eigen::MatrixXd de_next = de;

    // v_{p+1} = v_p + f_v([v_p; agg(e_p)])
    const Eigen::MatrixXd d_vin = back(model.f_v, tape.fv_tapes[static_cast<std::size_t>(pass)],
                                       dv_next, param_grads ? &param_grads->f_v : nullptr);
    dv = dv_next + d_vin.topRows(lv);
    de = Eigen::MatrixXd::Zero(lv, e);
    for (int k = 0; k < e; ++k)
      de.col(k) = d_vin.bottomRows(lv).col(g.edges[static_cast<std::size_t>(k)].first);

    // e_{p+1} = e_p + f_e([e_p; v_i; v_j])
    if (e > 0) {
      const Eigen::MatrixXd d_ein = back(model.f_e, tape.fe_tapes[static_cast<std::size_t>(pass)],
                                         de_next, param_grads ? &param_grads->f_e : nullptr);
      de += de_next + d_ein.topRows(lv);
      for (int k = 0; k < e; ++k) {
        const auto [i, j] = g.edges[static_cast<std::size_t>(k)];
        dv.col(i) += d_ein.block(lv, k, lv, 1);
        dv.col(j) += d_ein.block(2 * lv, k, lv, 1);
      }
    }
  }

  // Through the encoders and the feature normalization.
  const Eigen::MatrixXd d_vfeat = model.vertex_norm.grad_to_raw(
      back(model.phi_v, tape.enc_v, dv, param_grads ? &param_grads->phi_v : nullptr));
  Eigen::MatrixXd d_efeat = Eigen::MatrixXd::Zero(3, e);
  if (e > 0)
    d_efeat = model.edge_norm.grad_to_raw(
        back(model.phi_e, tape.enc_e, de, param_grads ? &param_grads->phi_e : nullptr));

  GnnInputGrads out;
  out.d_history.assign(static_cast<std::size_t>(m1), Points::Zero(2, n));
  out.d_control = Eigen::VectorXd::Zero(6);

  // Vertex features: rows (2j, 2j+1) hold x_i(t-j); history is oldest-first.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m1; ++j)
      out.d_history[static_cast<std::size_t>(m1 - 1 - j)].col(i) += d_vfeat.block<2, 1>(2 * j, i);
  out.d_control.segment<3>(0) = d_vfeat.block<3, 1>(2 * m1, 0);
  out.d_control.segment<3>(3) = d_vfeat.block<3, 1>(2 * m1, n - 1);

  // Edge features live on the newest frame: d = x_i - x_j and |d|.
  Points& d_now = out.d_history.back();
  const Points& now = g.vertex_features.topRows(2);  // newest positions, by construction
  for (int k = 0; k < e; ++k) {
    const auto [i, j] = g.edges[static_cast<std::size_t>(k)];
    const Vec2 diff = now.col(i) - now.col(j);
    Vec2 gd = d_efeat.block<2, 1>(0, k);
    const double norm = diff.norm();
    if (norm > kEdgeNormEps) gd += d_efeat(2, k) * diff / norm;
    d_now.col(i) += gd;
    d_now.col(j) -= gd;
  }
  return out;
}

std::vector<Points> rollout_model(const GnnModel& model, std::vector<Points> history,
                                  const std::vector<ControlInput>& controls, double dt, int steps) {
  if (steps < 1) throw std::invalid_argument("rollout_model needs steps >= 1");
  if (static_cast<int>(controls.size()) < steps)
    throw std::invalid_argument("not enough controls for the requested steps");

  std::vector<Points> out;
  out.reserve(static_cast<std::size_t>(steps));
  for (int s = 0; s < steps; ++s) {
    const Points xdot = predict(model, history, controls[static_cast<std::size_t>(s)]);
    Points next = history.back() + dt * xdot;
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > 10.0)
      throw std::runtime_error("model rollout diverged at step " + std::to_string(s));
    history.erase(history.begin());
    history.push_back(next);
    out.push_back(std::move(next));
  }
  return out;
}

}  // namespace cablelab::gnn
