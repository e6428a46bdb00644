#include "cablelab/io/checkpoint.hpp"

#include "cablelab/io/jsonl.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

namespace cablelab::io {

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mlp_to_json(const nn::Mlp& net) {
  return json{{"widths", net.widths}, {"params", vec_to_json(net.to_flat())}};
}

nn::Mlp mlp_from_json(const json& j) {
  nn::Mlp net = nn::Mlp::zeros(j.at("widths").get<std::vector<int>>());
  net.from_flat(vec_from_json(j.at("params")));
  return net;
}

json norm_to_json(const nn::Normalizer& n) {
  return json{{"mean", vec_to_json(n.mean)}, {"std", vec_to_json(n.std)}};
}

nn::Normalizer norm_from_json(const json& j) {
  nn::Normalizer n;
  n.mean = vec_from_json(j.at("mean"));
  n.std = vec_from_json(j.at("std"));
  return n;
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

}  // namespace

void save_checkpoint(const gnn::GnnModel& model, const std::string& path) {
  json j;
  j["format_version"] = kCheckpointVersion;
  j["kind"] = "gnn";
  j["precision"] = "f64";
  j["arch"] = {{"window", model.arch.window},
               {"message_passing", model.arch.message_passing},
               {"radius", model.arch.radius},
               {"hidden_width", model.arch.hidden_width},
               {"hidden_layers", model.arch.hidden_layers},
               {"latent_width", model.arch.latent_width},
               {"n_keypoints", model.arch.n_keypoints}};
  j["trained"] = model.trained;
  j["nets"] = {{"phi_v", mlp_to_json(model.phi_v)}, {"phi_e", mlp_to_json(model.phi_e)},
               {"psi_v", mlp_to_json(model.psi_v)}, {"psi_e", mlp_to_json(model.psi_e)},
               {"f_v", mlp_to_json(model.f_v)},     {"f_e", mlp_to_json(model.f_e)}};
  j["norms"] = {{"vertex", norm_to_json(model.vertex_norm)},
                {"edge", norm_to_json(model.edge_norm)},
                {"target", norm_to_json(model.target_norm)}};
  atomic_write_text(path, j.dump());
}

gnn::GnnModel load_checkpoint(const std::string& path) {
  const json j = load_json(path);
  if (j.value("format_version", -1) != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version in " + path);
  if (j.value("kind", "") != "gnn") throw std::runtime_error(path + " is not a dynamics checkpoint");

  gnn::GnnModel m;
  const json& a = j.at("arch");
  m.arch.window = a.at("window");
  m.arch.message_passing = a.at("message_passing");
  m.arch.radius = a.at("radius");
  m.arch.hidden_width = a.at("hidden_width");
  m.arch.hidden_layers = a.at("hidden_layers");
  m.arch.latent_width = a.at("latent_width");
  m.arch.n_keypoints = a.at("n_keypoints");
  m.trained = j.at("trained");
  m.phi_v = mlp_from_json(j.at("nets").at("phi_v"));
  m.phi_e = mlp_from_json(j.at("nets").at("phi_e"));
  m.psi_v = mlp_from_json(j.at("nets").at("psi_v"));
  m.psi_e = mlp_from_json(j.at("nets").at("psi_e"));
  m.f_v = mlp_from_json(j.at("nets").at("f_v"));
  m.f_e = mlp_from_json(j.at("nets").at("f_e"));
  m.vertex_norm = norm_from_json(j.at("norms").at("vertex"));
  m.edge_norm = norm_from_json(j.at("norms").at("edge"));
  m.target_norm = norm_from_json(j.at("norms").at("target"));
  return m;
}

void save_mlp_baseline(const gnn::MlpBaseline& baseline, const std::string& path) {
  json j;
  j["format_version"] = kCheckpointVersion;
  j["kind"] = "mlp";
  j["precision"] = "f64";
  j["window"] = baseline.window;
  j["trained"] = baseline.trained;
  j["net"] = mlp_to_json(baseline.net);
  j["norms"] = {{"input", norm_to_json(baseline.input_norm)},
                {"target", norm_to_json(baseline.target_norm)}};
  atomic_write_text(path, j.dump());
}

gnn::MlpBaseline load_mlp_baseline(const std::string& path) {
  const json j = load_json(path);
  if (j.value("format_version", -1) != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version in " + path);
  if (j.value("kind", "") != "mlp") throw std::runtime_error(path + " is not a baseline checkpoint");
  gnn::MlpBaseline b;
  b.window = j.at("window");
  b.trained = j.at("trained");
  b.net = mlp_from_json(j.at("net"));
  b.input_norm = norm_from_json(j.at("norms").at("input"));
  b.target_norm = norm_from_json(j.at("norms").at("target"));
  return b;
}

}  // namespace cablelab::io
