#include "cablelab/bench/benchmark.hpp"

#include "cablelab/gnn/train.hpp"
#include "cablelab/io/jsonl.hpp"
#include "cablelab/sim/policy.hpp"

#include <json.hpp>

#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace cablelab::bench {

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Cell {
  std::string scenario;
  double scale;
  std::string mode;
  int trial;
};

// Random exploration data collected on the perturbed cable, for the
// fine-tuning mode.
gnn::Dataset collect_transitions(const RunConfig& cfg, double scale, std::uint64_t seed,
                                 int transitions) {
  const sim::CableParams params = sim::perturb(cfg.cable, scale);
  const sim::Cable cable(params);
  const int steps = std::min(cfg.data.steps, 60);
  std::vector<Trajectory> trajs;
  int have = 0;
  for (int k = 0; have < transitions; ++k) {
    const auto controls = sim::random_policy(splitmix64(seed + 1000 + k), steps,
                                             cfg.data.max_speed);
    trajs.push_back(cable.rollout(cable.initial_state(), controls, cfg.mpc.dt));
    have += steps;
  }
  gnn::Dataset d = gnn::build_dataset(trajs, cfg.gnn.window, cfg.mpc.dt);
  if (static_cast<int>(d.transitions.size()) > transitions)
    d.transitions.resize(static_cast<std::size_t>(transitions));
  return d;
}

CellResult run_cell(const RunConfig& cfg, const Cell& cell, const gnn::GnnModel* model,
                    const gnn::GnnModel* domrand_model, const std::string& out_dir) {
  CellResult res;
  res.scenario = cell.scenario;
  res.scale = cell.scale;
  res.mode = cell.mode;
  res.trial = cell.trial;

  const std::uint64_t seed = cell_seed(cfg.run.seed, cell.scenario, cell.scale, cell.mode, cell.trial);
  try {
    const sim::Scenario scenario = sim::make_scenario(cell.scenario, cfg.cable, cell.scale, seed);
    const mpc::TaskConfig task_cfg = cfg.task_config();

    mpc::TaskLog log;
    if (cell.mode == "finetune") {
      gnn::GnnModel tuned = *model;
      gnn::TrainConfig tc = cfg.train_config(seed);
      tc.epochs = cfg.bench.finetune_epochs;
      tc.lr_start = 0.1 * cfg.train.lr_start;
      gnn::fine_tune(tuned, collect_transitions(cfg, cell.scale, seed, cfg.bench.finetune_transitions),
                     tc);
      log = mpc::run_task(scenario, cfg.cable, &tuned, mpc::Mode::Direct, task_cfg, seed);
    } else if (cell.mode == "domrand") {
      log = mpc::run_task(scenario, cfg.cable, domrand_model, mpc::Mode::Direct, task_cfg, seed);
    } else {
      log = mpc::run_task(scenario, cfg.cable, model, mpc::mode_from_string(cell.mode), task_cfg,
                          seed);
    }

    res.terminal_error_cm = 100.0 * log.terminal_error_m;
    res.settling_time_s = log.settling_time_s;
    res.steps = log.total_steps;
    res.settled = log.settled;
    res.error_cause = log.error_cause;

    const std::string stem = out_dir + "/task_" + cell.scenario + "_x" + fmt(cell.scale) + "_" +
                             cell.mode + "_t" + std::to_string(cell.trial);
    mpc::write_task_csv(log, stem + ".csv");
    mpc::write_task_summary_json(log, stem + ".json");
  } catch (const std::exception& e) {
    res.error_cause = e.what();
    res.terminal_error_cm = std::nan("");
    res.settling_time_s = std::nan("");
  }
  return res;
}

Aggregate aggregate(const std::vector<const CellResult*>& rows) {
  Aggregate a;
  a.count = static_cast<int>(rows.size());
  if (rows.empty()) return a;
  for (const CellResult* r : rows) {
    a.error_mean += r->terminal_error_cm;
    a.settle_mean += r->settling_time_s;
  }
  a.error_mean /= a.count;
  a.settle_mean /= a.count;
  if (a.count > 1) {
    double ve = 0.0, vs = 0.0;
    for (const CellResult* r : rows) {
      ve += (r->terminal_error_cm - a.error_mean) * (r->terminal_error_cm - a.error_mean);
      vs += (r->settling_time_s - a.settle_mean) * (r->settling_time_s - a.settle_mean);
    }
    a.error_std = std::sqrt(ve / (a.count - 1));  // sample convention
    a.settle_std = std::sqrt(vs / (a.count - 1));
  }
  return a;
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t base, const std::string& scenario, double scale,
                        const std::string& mode, int trial) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ base;
  const auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  };
  mix(scenario);
  mix(fmt(scale));
  mix(mode);
  h = (h ^ static_cast<std::uint64_t>(trial)) * 0x100000001b3ULL;
  return splitmix64(h);
}

BenchmarkReport run_benchmark(const RunConfig& cfg, const gnn::GnnModel* model,
                              const gnn::GnnModel* domrand_model, const std::string& out_dir) {
  for (const std::string& m : cfg.bench.modes) {
    if (m != "direct" && m != "servo" && m != "hybrid" && m != "finetune" && m != "domrand")
      throw ConfigError("unknown benchmark mode '" + m + "'");
    if (m == "domrand" && domrand_model == nullptr)
      throw ConfigError("domrand mode requires a domain-randomized checkpoint");
    if (m != "servo" && model == nullptr)
      throw ConfigError("mode '" + m + "' requires a trained checkpoint");
  }
  std::filesystem::create_directories(out_dir);

  std::vector<Cell> cells;
  for (const std::string& sc : cfg.bench.scenarios)
    for (double scale : cfg.bench.scales)
      for (const std::string& mode : cfg.bench.modes)
        for (int trial = 0; trial < cfg.bench.seeds; ++trial)
          cells.push_back({sc, scale, mode, trial});

  BenchmarkReport report;
  report.rows.resize(cells.size());

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned want = cfg.bench.threads > 0 ? static_cast<unsigned>(cfg.bench.threads) : hw;
  const unsigned n_threads = std::min<unsigned>(want, static_cast<unsigned>(cells.size()));

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      report.rows[i] = run_cell(cfg, cells[i], model, domrand_model, out_dir);
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const std::string& sc : cfg.bench.scenarios) {
    for (const std::string& mode : cfg.bench.modes) {
      std::vector<const CellResult*> group;
      for (const CellResult& r : report.rows)
        if (r.scenario == sc && r.mode == mode && r.error_cause.empty()) group.push_back(&r);
      report.by_scenario_mode.emplace_back(sc, mode, aggregate(group));
    }
  }
  return report;
}

void write_report_csv(const BenchmarkReport& report, const std::string& path) {
  std::ostringstream out;
  out << "scenario,scale,mode,trial,terminal_error_cm,settling_time_s,steps,settled,error\n";
  for (const CellResult& r : report.rows) {
    out << r.scenario << ',' << fmt(r.scale) << ',' << r.mode << ',' << r.trial << ','
        << fmt(r.terminal_error_cm) << ',' << fmt(r.settling_time_s) << ',' << r.steps << ','
        << (r.settled ? 1 : 0) << ',' << r.error_cause << '\n';
  }
  io::atomic_write_text(path, out.str());
}

void write_report_json(const BenchmarkReport& report, const std::string& path) {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const CellResult& r : report.rows) {
    j["rows"].push_back({{"scenario", r.scenario},
                         {"scale", r.scale},
                         {"mode", r.mode},
                         {"trial", r.trial},
                         {"terminal_error_cm", r.terminal_error_cm},
                         {"settling_time_s", r.settling_time_s},
                         {"steps", r.steps},
                         {"settled", r.settled}});
  }
  j["aggregates"] = nlohmann::json::array();
  for (const auto& [sc, mode, a] : report.by_scenario_mode) {
    j["aggregates"].push_back({{"scenario", sc},
                               {"mode", mode},
                               {"terminal_error_cm", {{"mean", a.error_mean}, {"std", a.error_std}}},
                               {"settling_time_s", {{"mean", a.settle_mean}, {"std", a.settle_std}}},
                               {"count", a.count}});
  }
  io::atomic_write_text(path, j.dump(2) + "\n");
}

}  // namespace cablelab::bench
