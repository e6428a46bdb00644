#include "cablelab/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace cablelab {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for " + key + ": '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("bad integer value for " + key + ": '" + v + "'");
  }
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Entry {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define FIELD_D(name, member)                                                       \
  Entry{name, [](const RunConfig& c) { return fmt_double(c.member); },              \
        [](RunConfig& c, const std::string& v) { c.member = parse_double(name, v); }}
#define FIELD_I(name, member)                                                       \
  Entry{name, [](const RunConfig& c) { return std::to_string(c.member); },          \
        [](RunConfig& c, const std::string& v) {                                    \
          c.member = static_cast<decltype(c.member)>(parse_int(name, v));           \
        }}

std::vector<Entry> registry() {
  std::vector<Entry> r{
      FIELD_D("cable.length", cable.length),
      FIELD_D("cable.diameter", cable.diameter),
      FIELD_I("cable.n_particles", cable.n_particles),
      FIELD_I("cable.n_keypoints", cable.n_keypoints),
      FIELD_D("cable.elastic_stiffness", cable.elastic_stiffness),
      FIELD_D("cable.damping_stiffness", cable.damping_stiffness),
      FIELD_D("cable.bending_stiffness", cable.bending_stiffness),
      FIELD_D("cable.particle_mass", cable.particle_mass),
      FIELD_D("cable.inner_dt", cable.inner_dt),
      FIELD_D("cable.global_scale", cable.global_scale),
      FIELD_I("gnn.window", gnn.window),
      FIELD_I("gnn.message_passing", gnn.message_passing),
      FIELD_D("gnn.radius", gnn.radius),
      FIELD_I("gnn.hidden_layers", gnn.hidden_layers),
      FIELD_I("gnn.hidden_width", gnn.hidden_width),
      FIELD_I("gnn.latent_width", gnn.latent_width),
      FIELD_I("train.batch_size", train.batch_size),
      FIELD_D("train.lr_start", train.lr_start),
      FIELD_D("train.lr_end", train.lr_end),
      FIELD_I("train.epochs", train.epochs),
      FIELD_I("train.ae_epochs", train.ae_epochs),
      FIELD_D("train.noise_std", train.noise_std),
      FIELD_I("mpc.horizon", mpc.horizon),
      FIELD_D("mpc.dt", mpc.dt),
      FIELD_D("mpc.lambda", mpc.lambda),
      FIELD_D("mpc.trust_init", mpc.trust_init),
      FIELD_D("mpc.eta_plus", mpc.eta_plus),
      FIELD_D("mpc.eta_minus", mpc.eta_minus),
      FIELD_D("mpc.tau_plus", mpc.tau_plus),
      FIELD_D("mpc.tau_minus", mpc.tau_minus),
      FIELD_D("mpc.settle_tol", mpc.settle_tol),
      FIELD_I("mpc.max_steps", mpc.max_steps),
      FIELD_I("mpc.solver_iters", mpc.solver_iters),
      FIELD_D("mpc.solver_tol", mpc.solver_tol),
      FIELD_D("mpc.omega_weight", mpc.omega_weight),
      FIELD_I("task.warmup_steps", task.warmup_steps),
      FIELD_D("task.warmup_speed", task.warmup_speed),
      FIELD_D("gmm.mu", gmm.mu),
      FIELD_D("gmm.sigma2_init", gmm.sigma2_init),
      FIELD_I("gmm.max_iters", gmm.max_iters),
      FIELD_D("gmm.tol", gmm.tol),
      FIELD_I("gmm.pts_per_segment", gmm.pts_per_segment),
      FIELD_D("gmm.noise_sigma", gmm.noise_sigma),
      FIELD_D("gmm.outlier_ratio", gmm.outlier_ratio),
      FIELD_I("data.trajectories", data.trajectories),
      FIELD_I("data.steps", data.steps),
      FIELD_D("data.max_speed", data.max_speed),
      FIELD_I("data.val_trajectories", data.val_trajectories),
      FIELD_I("bench.seeds", bench.seeds),
      FIELD_I("bench.finetune_transitions", bench.finetune_transitions),
      FIELD_I("bench.finetune_epochs", bench.finetune_epochs),
      FIELD_I("bench.threads", bench.threads),
      FIELD_I("run.seed", run.seed),
  };
  r.push_back(Entry{"data.domain_randomization",
                    [](const RunConfig& c) { return c.data.domain_randomization ? "true" : "false"; },
                    [](RunConfig& c, const std::string& v) {
                      if (v == "true" || v == "1")
                        c.data.domain_randomization = true;
                      else if (v == "false" || v == "0")
                        c.data.domain_randomization = false;
                      else
                        throw ConfigError("bad boolean for data.domain_randomization: '" + v + "'");
                    }});
  r.push_back(Entry{"bench.scenarios",
                    [](const RunConfig& c) {
                      std::string s;
                      for (const auto& x : c.bench.scenarios) s += (s.empty() ? "" : ",") + x;
                      return s;
                    },
                    [](RunConfig& c, const std::string& v) { c.bench.scenarios = split_list(v); }});
  r.push_back(Entry{"bench.scales",
                    [](const RunConfig& c) {
                      std::string s;
                      for (double x : c.bench.scales) s += (s.empty() ? "" : ",") + fmt_double(x);
                      return s;
                    },
                    [](RunConfig& c, const std::string& v) {
                      c.bench.scales.clear();
                      for (const auto& item : split_list(v))
                        c.bench.scales.push_back(parse_double("bench.scales", item));
                    }});
  r.push_back(Entry{"bench.modes",
                    [](const RunConfig& c) {
                      std::string s;
                      for (const auto& x : c.bench.modes) s += (s.empty() ? "" : ",") + x;
                      return s;
                    },
                    [](RunConfig& c, const std::string& v) { c.bench.modes = split_list(v); }});
  r.push_back(Entry{"run.out_dir", [](const RunConfig& c) { return c.run.out_dir; },
                    [](RunConfig& c, const std::string& v) { c.run.out_dir = v; }});
  return r;
}

#undef FIELD_D
#undef FIELD_I

}  // namespace

gnn::GnnArch RunConfig::gnn_arch() const {
  gnn::GnnArch a;
  a.window = gnn.window;
  a.message_passing = gnn.message_passing;
  a.radius = gnn.radius;
  a.hidden_layers = gnn.hidden_layers;
  a.hidden_width = gnn.hidden_width;
  a.latent_width = gnn.latent_width;
  a.n_keypoints = cable.n_keypoints;
  return a;
}

gnn::TrainConfig RunConfig::train_config(std::uint64_t seed) const {
  gnn::TrainConfig t;
  t.epochs = train.epochs;
  t.ae_epochs = train.ae_epochs;
  t.lr_start = train.lr_start;
  t.lr_end = train.lr_end;
  t.seed = seed;
  t.noise_std = train.noise_std;
  return t;
}

mpc::TaskConfig RunConfig::task_config() const {
  mpc::TaskConfig t;
  t.mpc = mpc;
  t.window = gnn.window;
  t.warmup_steps = task.warmup_steps;
  t.warmup_speed = task.warmup_speed;
  return t;
}

perception::GmmConfig RunConfig::gmm_config() const {
  perception::GmmConfig g;
  g.mu = gmm.mu;
  g.sigma2_init = gmm.sigma2_init;
  g.max_iters = gmm.max_iters;
  g.tol = gmm.tol;
  return g;
}

void RunConfig::apply_paper_scale() {
  data.trajectories = 10000;
  data.steps = 200;
  data.val_trajectories = 100;
  train.epochs = 5;
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  const std::vector<Entry> reg = registry();
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'section.key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool found = false;
    for (const Entry& e : reg) {
      if (e.key == key) {
        e.set(cfg, value);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("unknown config key '" + key + "'");
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const Entry& e : registry()) out += e.key + " = " + e.get(cfg) + "\n";
  return out;
}

}  // namespace cablelab
