#include "cablelab/io/jsonl.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cablelab::io {

namespace {

using nlohmann::json;

json points_to_json(const Points& p) {
  json arr = json::array();
  for (int i = 0; i < p.cols(); ++i) arr.push_back({p(0, i), p(1, i)});
  return arr;
}

Points points_from_json(const json& arr) {
  Points p(2, arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    p(0, static_cast<int>(i)) = arr[i][0].get<double>();
    p(1, static_cast<int>(i)) = arr[i][1].get<double>();
  }
  return p;
}

json control_to_json(const ControlInput& u) {
  json arr = json::array();
  for (const auto& r : u.robots) arr.push_back({r.x(), r.y(), r.z()});
  return arr;
}

ControlInput control_from_json(const json& arr) {
  ControlInput u(static_cast<int>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i)
    u.robots[i] = Eigen::Vector3d(arr[i][0].get<double>(), arr[i][1].get<double>(),
                                  arr[i][2].get<double>());
  return u;
}

json params_to_json(const sim::CableParams& p) {
  return json{{"length", p.length},
              {"diameter", p.diameter},
              {"n_particles", p.n_particles},
              {"n_keypoints", p.n_keypoints},
              {"elastic_stiffness", p.elastic_stiffness},
              {"damping_stiffness", p.damping_stiffness},
              {"bending_stiffness", p.bending_stiffness},
              {"particle_mass", p.particle_mass},
              {"inner_dt", p.inner_dt},
              {"global_scale", p.global_scale}};
}

sim::CableParams params_from_json(const json& j) {
  sim::CableParams p;
  p.length = j.at("length");
  p.diameter = j.at("diameter");
  p.n_particles = j.at("n_particles");
  p.n_keypoints = j.at("n_keypoints");
  p.elastic_stiffness = j.at("elastic_stiffness");
  p.damping_stiffness = j.at("damping_stiffness");
  p.bending_stiffness = j.at("bending_stiffness");
  p.particle_mass = j.at("particle_mass");
  p.inner_dt = j.at("inner_dt");
  p.global_scale = j.at("global_scale");
  return p;
}

std::vector<json> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<json> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    lines.push_back(json::parse(line));
  }
  return lines;
}

}  // namespace

void atomic_write_text(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + tmp);
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

void write_trajectory(const std::string& path, const TrajectoryHeader& header,
                      const Trajectory& traj) {
  if (traj.states.size() != traj.controls.size() + 1)
    throw std::invalid_argument("trajectory must hold one more state than controls");
  std::ostringstream out;
  json head{{"params", params_to_json(header.params)},
            {"seed", header.seed},
            {"dt", header.dt},
            {"stiffness_scale", header.stiffness_scale},
            {"steps", traj.controls.size()}};
  out << head.dump() << '\n';
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    json rec{{"t", t}, {"X", points_to_json(traj.states[t].keypoints)}};
    if (t < traj.controls.size()) rec["R"] = control_to_json(traj.controls[t]);
    out << rec.dump() << '\n';
  }
  atomic_write_text(path, out.str());
}

Trajectory read_trajectory(const std::string& path, TrajectoryHeader* header) {
  const std::vector<json> lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error("empty trajectory file " + path);
  const json& head = lines.front();
  TrajectoryHeader h;
  h.params = params_from_json(head.at("params"));
  h.seed = head.at("seed");
  h.dt = head.at("dt");
  h.stiffness_scale = head.value("stiffness_scale", 1.0);
  if (header) *header = h;

  Trajectory traj;
  double prev_t = 0.0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const json& rec = lines[i];
    CableState s;
    s.keypoints = points_from_json(rec.at("X"));
    s.timestamp = rec.at("t").get<double>() * h.dt;
    s.velocities = Points::Zero(2, s.n());
    if (!traj.states.empty())
      s.velocities = (s.keypoints - traj.states.back().keypoints) / (s.timestamp - prev_t);
    prev_t = s.timestamp;
    traj.states.push_back(std::move(s));
    if (rec.contains("R")) traj.controls.push_back(control_from_json(rec.at("R")));
  }
  if (traj.states.size() != traj.controls.size() + 1)
    throw std::runtime_error("malformed trajectory file " + path);
  return traj;
}

void write_clouds(const std::string& path, const std::vector<perception::PointCloud>& clouds) {
  std::ostringstream out;
  for (std::size_t t = 0; t < clouds.size(); ++t) {
    json rec{{"t", t}, {"Y", points_to_json(clouds[t].points)}};
    out << rec.dump() << '\n';
  }
  atomic_write_text(path, out.str());
}

std::vector<perception::PointCloud> read_clouds(const std::string& path) {
  std::vector<perception::PointCloud> clouds;
  for (const json& rec : read_lines(path)) clouds.push_back({points_from_json(rec.at("Y"))});
  return clouds;
}

void write_keypoints(const std::string& path, const std::vector<Points>& frames) {
  std::ostringstream out;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    json rec{{"t", t}, {"X", points_to_json(frames[t])}};
    out << rec.dump() << '\n';
  }
  atomic_write_text(path, out.str());
}

std::vector<Points> read_keypoints(const std::string& path) {
  std::vector<Points> frames;
  for (const json& rec : read_lines(path)) frames.push_back(points_from_json(rec.at("X")));
  return frames;
}

}  // namespace cablelab::io
