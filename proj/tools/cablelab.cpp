#include "cablelab/bench/benchmark.hpp"
#include "cablelab/bench/svg.hpp"
#include "cablelab/config.hpp"
#include "cablelab/gnn/train.hpp"
#include "cablelab/io/checkpoint.hpp"
#include "cablelab/io/jsonl.hpp"
#include "cablelab/mpc/task.hpp"
#include "cablelab/perception/gmm.hpp"
#include "cablelab/sim/policy.hpp"
#include "cablelab/sim/shapes.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cablelab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out = "out";
  bool paper_scale = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_paper_scale = true) {
  cmd->add_option("--config", opts.config_path, "configuration file (section.key = value lines)");
  cmd->add_option("--seed", opts.seed, "base random seed")->each([&](const std::string&) {
    opts.seed_given = true;
  });
  cmd->add_option("--out", opts.out, "output directory or file");
  if (with_paper_scale)
    cmd->add_flag("--paper-scale", opts.paper_scale,
                  "use the full-size dataset/training settings (slow)");
}

RunConfig make_config(const CommonOpts& opts) {
  RunConfig cfg = opts.config_path.empty() ? RunConfig{} : load_config(opts.config_path);
  if (opts.seed_given) cfg.run.seed = opts.seed;
  if (opts.paper_scale) {
    cfg.apply_paper_scale();
    std::cerr << "warning: --paper-scale selected; data generation and training will take hours\n";
  }
  return cfg;
}

std::string traj_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "traj_%05d.jsonl", index);
  return buf;
}

std::vector<Trajectory> load_dataset_dir(const std::string& dir, json* manifest_out = nullptr) {
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open " + manifest_path.string());
  json manifest;
  in >> manifest;
  if (manifest_out) *manifest_out = manifest;

  std::vector<Trajectory> trajs;
  for (const auto& rec : manifest.at("trajectories"))
    trajs.push_back(io::read_trajectory((fs::path(dir) / rec.at("file").get<std::string>()).string()));
  return trajs;
}

int cmd_gen_data(const CommonOpts& opts, int override_n, int override_steps, bool domrand) {
  RunConfig cfg = make_config(opts);
  if (override_n > 0) cfg.data.trajectories = override_n;
  if (override_steps > 0) cfg.data.steps = override_steps;
  if (domrand) cfg.data.domain_randomization = true;
  cfg.cable.validate();
  fs::create_directories(opts.out);

  json manifest;
  manifest["seed"] = cfg.run.seed;
  manifest["dt"] = cfg.mpc.dt;
  manifest["steps_per_trajectory"] = cfg.data.steps;
  manifest["domain_randomization"] = cfg.data.domain_randomization;
  manifest["trajectories"] = json::array();

  for (int i = 0; i < cfg.data.trajectories; ++i) {
    const std::uint64_t traj_seed = mix_seed(cfg.run.seed + 7919ULL * (i + 1));
    double scale = 1.0;
    if (cfg.data.domain_randomization) {
      std::mt19937_64 rng(mix_seed(traj_seed + 1));
      scale = std::uniform_real_distribution<double>(0.1, 3.0)(rng);
    }
    const sim::CableParams params = sim::perturb(cfg.cable, scale);
    const sim::Cable cable(params);
    const auto controls = sim::random_policy(traj_seed, cfg.data.steps, cfg.data.max_speed);
    const Trajectory traj = cable.rollout(cable.initial_state(), controls, cfg.mpc.dt);

    const std::string file = traj_filename(i);
    io::TrajectoryHeader header{params, traj_seed, cfg.mpc.dt, scale};
    io::write_trajectory((fs::path(opts.out) / file).string(), header, traj);
    manifest["trajectories"].push_back(
        {{"file", file}, {"seed", traj_seed}, {"stiffness_scale", scale}});
  }
  io::atomic_write_text((fs::path(opts.out) / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cout << "wrote " << cfg.data.trajectories << " trajectories ("
            << cfg.data.trajectories * cfg.data.steps << " transitions) to " << opts.out << "\n";
  return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& data_dir, const std::string& finetune_from,
              bool with_mlp, int override_epochs) {
  RunConfig cfg = make_config(opts);
  if (override_epochs > 0) cfg.train.epochs = override_epochs;

  std::vector<Trajectory> trajs = load_dataset_dir(data_dir);
  if (trajs.empty()) throw std::runtime_error("no trajectories in " + data_dir);

  const int n_val = std::min<int>(cfg.data.val_trajectories, static_cast<int>(trajs.size()) / 10);
  std::vector<Trajectory> val_trajs(trajs.end() - n_val, trajs.end());
  trajs.resize(trajs.size() - static_cast<std::size_t>(n_val));

  const gnn::Dataset train_set = gnn::build_dataset(trajs, cfg.gnn.window, cfg.mpc.dt);
  const gnn::Dataset val_set = gnn::build_dataset(val_trajs, cfg.gnn.window, cfg.mpc.dt);
  std::cout << "training on " << train_set.transitions.size() << " transitions, validating on "
            << val_set.transitions.size() << "\n";

  gnn::TrainConfig tc = cfg.train_config(cfg.run.seed);
  tc.log_every = 1;

  if (!finetune_from.empty()) {
    gnn::GnnModel model = io::load_checkpoint(finetune_from);
    gnn::fine_tune(model, train_set, tc);
    io::save_checkpoint(model, opts.out);
    std::cout << "fine-tuned checkpoint written to " << opts.out << "\n";
    return 0;
  }

  const gnn::AutoencoderResult ae = gnn::train_autoencoders(train_set, cfg.gnn_arch(), tc);
  std::cout << "autoencoder reconstruction (normalized): vertex " << ae.vertex_loss << ", edge "
            << ae.edge_loss << "\n";

  gnn::TrainReport report;
  const gnn::GnnModel model =
      gnn::train_dynamics(train_set, val_set, ae, cfg.gnn_arch(), tc, &report);
  io::save_checkpoint(model, opts.out);
  std::cout << "one-step validation RMSE: " << report.val_rmse_m << " m\n";
  std::cout << "checkpoint written to " << opts.out << "\n";

  if (with_mlp) {
    const gnn::MlpBaseline baseline = gnn::train_mlp_baseline(train_set, tc);
    const std::string mlp_path = opts.out + ".mlp.json";
    io::save_mlp_baseline(baseline, mlp_path);
    std::cout << "baseline checkpoint written to " << mlp_path << "\n";
  }
  return 0;
}

// Mean over trajectories and key points of the Euclidean prediction error at
// each rollout depth.
std::vector<double> rollout_error_curve(const std::vector<Trajectory>& trajs, int max_steps,
                                        int window, double dt,
                                        const std::function<std::vector<Points>(
                                            const std::vector<Points>&, const std::vector<ControlInput>&,
                                            int)>& roll) {
  std::vector<double> sq(static_cast<std::size_t>(max_steps), 0.0);
  std::vector<int> count(static_cast<std::size_t>(max_steps), 0);
  for (const Trajectory& traj : trajs) {
    const int steps = std::min<int>(max_steps, static_cast<int>(traj.controls.size()));
    if (steps < 1) continue;
    std::vector<Points> history(static_cast<std::size_t>(window + 1), traj.states.front().keypoints);
    std::vector<Points> pred;
    try {
      pred = roll(history, traj.controls, steps);
    } catch (const std::exception&) {
      continue;  // diverged rollouts count as missing data
    }
    for (int s = 0; s < steps; ++s) {
      const Points& truth = traj.states[static_cast<std::size_t>(s + 1)].keypoints;
      sq[static_cast<std::size_t>(s)] +=
          (pred[static_cast<std::size_t>(s)] - truth).colwise().norm().array().square().mean();
      count[static_cast<std::size_t>(s)] += 1;
    }
  }
  std::vector<double> rmse(static_cast<std::size_t>(max_steps), 0.0);
  for (int s = 0; s < max_steps; ++s)
    rmse[static_cast<std::size_t>(s)] =
        count[static_cast<std::size_t>(s)] ? std::sqrt(sq[static_cast<std::size_t>(s)] /
                                                       count[static_cast<std::size_t>(s)])
                                           : std::nan("");
  (void)dt;
  return rmse;
}

int cmd_eval_rollout(const CommonOpts& opts, const std::string& ckpt_path,
                     const std::string& data_dir, int max_steps, const std::string& mlp_path) {
  RunConfig cfg = make_config(opts);
  const gnn::GnnModel model = io::load_checkpoint(ckpt_path);
  const std::vector<Trajectory> trajs = load_dataset_dir(data_dir);
  fs::create_directories(opts.out);

  const auto gnn_roll = [&](const std::vector<Points>& hist, const std::vector<ControlInput>& ctrl,
                            int steps) { return gnn::rollout_model(model, hist, ctrl, cfg.mpc.dt, steps); };
  const std::vector<double> gnn_rmse =
      rollout_error_curve(trajs, max_steps, model.arch.window, cfg.mpc.dt, gnn_roll);

  std::ostringstream csv;
  csv << "step,rmse_m\n";
  std::vector<double> xs;
  for (int s = 0; s < max_steps; ++s) {
    csv << (s + 1) << ',' << gnn_rmse[static_cast<std::size_t>(s)] << '\n';
    xs.push_back(s + 1);
  }
  io::atomic_write_text((fs::path(opts.out) / "rollout_error.csv").string(), csv.str());

  std::vector<bench::Series> series{{"gnn", xs, gnn_rmse}};
  if (!mlp_path.empty()) {
    const gnn::MlpBaseline baseline = io::load_mlp_baseline(mlp_path);
    const auto mlp_roll = [&](const std::vector<Points>& hist, const std::vector<ControlInput>& ctrl,
                              int steps) { return gnn::rollout_mlp(baseline, hist, ctrl, cfg.mpc.dt, steps); };
    const std::vector<double> mlp_rmse =
        rollout_error_curve(trajs, max_steps, baseline.window, cfg.mpc.dt, mlp_roll);
    std::ostringstream mcsv;
    mcsv << "step,rmse_m\n";
    for (int s = 0; s < max_steps; ++s)
      mcsv << (s + 1) << ',' << mlp_rmse[static_cast<std::size_t>(s)] << '\n';
    io::atomic_write_text((fs::path(opts.out) / "rollout_error_mlp.csv").string(), mcsv.str());
    series.push_back({"mlp", xs, mlp_rmse});
  }
  bench::write_line_chart((fs::path(opts.out) / "rollout_error.svg").string(),
                          "prediction error vs rollout steps", "rollout steps", "rmse (m)", series,
                          /*log_y=*/true);
  std::cout << "rollout error at step " << max_steps << ": " << gnn_rmse.back() << " m\n";
  return 0;
}

int cmd_run(const CommonOpts& opts, const std::string& ckpt_path, const std::string& scenario_name,
            const std::string& mode_name, double stiffness_scale) {
  RunConfig cfg = make_config(opts);
  const mpc::Mode mode = mpc::mode_from_string(mode_name);

  gnn::GnnModel model;
  const gnn::GnnModel* model_ptr = nullptr;
  if (mode == mpc::Mode::Direct || mode == mpc::Mode::Hybrid) {
    if (ckpt_path.empty()) throw ConfigError("mode " + mode_name + " requires --checkpoint");
    model = io::load_checkpoint(ckpt_path);
    model_ptr = &model;
  }

  const sim::Scenario scenario =
      sim::make_scenario(scenario_name, cfg.cable, stiffness_scale, cfg.run.seed);
  const mpc::TaskLog log =
      mpc::run_task(scenario, cfg.cable, model_ptr, mode, cfg.task_config(), cfg.run.seed);

  fs::create_directories(opts.out);
  const std::string stem = (fs::path(opts.out) / ("task_" + scenario_name + "_" + mode_name)).string();
  mpc::write_task_csv(log, stem + ".csv");
  mpc::write_task_summary_json(log, stem + ".json");

  std::cout << "mode=" << mode_name << " scenario=" << scenario_name << " scale=" << stiffness_scale
            << " terminal_error=" << 100.0 * log.terminal_error_m << " cm"
            << " settling_time=" << log.settling_time_s << " s steps=" << log.total_steps
            << (log.settled ? " (settled)" : " (not settled)") << "\n";
  if (!log.error_cause.empty()) {
    std::cerr << "task aborted: " << log.error_cause << "\n";
    return kExitRuntime;
  }
  return 0;
}

int cmd_benchmark(const CommonOpts& opts, const std::string& ckpt_path,
                  const std::string& domrand_path, const std::string& modes_csv, int threads) {
  RunConfig cfg = make_config(opts);
  if (threads > 0) cfg.bench.threads = threads;
  if (!modes_csv.empty()) {
    cfg.bench.modes.clear();
    std::stringstream ss(modes_csv);
    std::string item;
    while (std::getline(ss, item, ',')) cfg.bench.modes.push_back(item);
  }

  gnn::GnnModel model, domrand;
  const gnn::GnnModel *model_ptr = nullptr, *domrand_ptr = nullptr;
  if (!ckpt_path.empty()) {
    model = io::load_checkpoint(ckpt_path);
    model_ptr = &model;
  }
  if (!domrand_path.empty()) {
    domrand = io::load_checkpoint(domrand_path);
    domrand_ptr = &domrand;
  }

  const bench::BenchmarkReport report =
      bench::run_benchmark(cfg, model_ptr, domrand_ptr, opts.out);
  bench::write_report_csv(report, (fs::path(opts.out) / "benchmark.csv").string());
  bench::write_report_json(report, (fs::path(opts.out) / "benchmark.json").string());
  io::atomic_write_text((fs::path(opts.out) / "config.txt").string(), serialize_config(cfg));

  std::cout << "scenario mode terminal_error_cm settling_time_s\n";
  for (const auto& [sc, mode, agg] : report.by_scenario_mode)
    std::cout << sc << " " << mode << " " << agg.error_mean << " +- " << agg.error_std << " "
              << agg.settle_mean << " +- " << agg.settle_std << "\n";
  return 0;
}

int cmd_estimate(const CommonOpts& opts, const std::string& clouds_path,
                 const std::string& init_path) {
  RunConfig cfg = make_config(opts);
  const auto clouds = io::read_clouds(clouds_path);
  if (clouds.empty()) throw std::runtime_error("no cloud frames in " + clouds_path);

  Points estimate;
  if (init_path.empty()) {
    estimate = sim::make_cable(cfg.cable).keypoints;  // straight line at the known grasp span
  } else {
    const auto frames = io::read_keypoints(init_path);
    if (frames.empty()) throw std::runtime_error("empty init file " + init_path);
    estimate = frames.front();
  }

  const perception::GmmConfig gmm_cfg = cfg.gmm_config();
  std::vector<Points> out_frames;
  int total_iters = 0;
  for (const auto& cloud : clouds) {
    const perception::EmResult res = perception::em_fit(cloud, estimate, gmm_cfg);
    estimate = res.keypoints;  // temporal tracking: warm-start the next frame
    total_iters += res.iterations;
    out_frames.push_back(estimate);
  }
  io::write_keypoints(opts.out, out_frames);
  std::cout << "estimated " << out_frames.size() << " frames (mean EM iterations "
            << static_cast<double>(total_iters) / out_frames.size() << ") -> " << opts.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cablelab: 2D cable dynamics learning and trust-region MPC laboratory"};
  app.require_subcommand(1);

  CommonOpts gen_opts, train_opts, eval_opts, run_opts, bench_opts, est_opts;

  auto* gen = app.add_subcommand("gen-data", "generate random-policy trajectories");
  add_common(gen, gen_opts);
  int gen_n = 0, gen_steps = 0;
  bool gen_domrand = false;
  gen->add_option("--trajectories", gen_n, "number of trajectories (overrides config)");
  gen->add_option("--steps", gen_steps, "steps per trajectory (overrides config)");
  gen->add_flag("--domain-randomization", gen_domrand,
                "perturb stiffness per trajectory in [0.1, 3]x");

  auto* train = app.add_subcommand("train", "train autoencoders and dynamics");
  add_common(train, train_opts);
  std::string train_data, finetune_from;
  bool with_mlp = false;
  int train_epochs = 0;
  train->add_option("--data", train_data, "dataset directory (from gen-data)")->required();
  train->add_option("--finetune", finetune_from, "continue training from this checkpoint");
  train->add_flag("--with-mlp-baseline", with_mlp, "also train the flat MLP baseline");
  train->add_option("--epochs", train_epochs, "override training epochs");

  auto* eval = app.add_subcommand("eval-rollout", "error vs rollout depth on held-out data");
  add_common(eval, eval_opts, false);
  std::string eval_ckpt, eval_data, eval_mlp;
  int eval_steps = 20;
  eval->add_option("--checkpoint", eval_ckpt, "dynamics checkpoint")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--max-steps", eval_steps, "rollout depth");
  eval->add_option("--mlp", eval_mlp, "also evaluate this MLP baseline checkpoint");

  auto* run = app.add_subcommand("run", "closed-loop shape control task");
  add_common(run, run_opts, false);
  std::string run_ckpt, run_scenario = "U", run_mode = "hybrid";
  double run_scale = 1.0;
  run->add_option("--checkpoint", run_ckpt, "dynamics checkpoint");
  run->add_option("--scenario", run_scenario, "U | S | Z | random");
  run->add_option("--mode", run_mode, "direct | servo | hybrid | oracle");
  run->add_option("--stiffness-scale", run_scale, "true cable stiffness multiplier");

  auto* bench_cmd = app.add_subcommand("benchmark", "scenario x stiffness x mode x seed grid");
  add_common(bench_cmd, bench_opts, false);
  std::string bench_ckpt, bench_domrand, bench_modes;
  int bench_threads = 0;
  bench_cmd->add_option("--checkpoint", bench_ckpt, "dynamics checkpoint");
  bench_cmd->add_option("--domrand-checkpoint", bench_domrand,
                        "domain-randomization-trained checkpoint");
  bench_cmd->add_option("--modes", bench_modes, "comma list overriding bench.modes");
  bench_cmd->add_option("--threads", bench_threads, "worker threads (0 = auto)");

  auto* est = app.add_subcommand("estimate", "GMM-EM key points from point-cloud files");
  add_common(est, est_opts, false);
  std::string est_clouds, est_init;
  est->add_option("--clouds", est_clouds, "cloud JSONL file")->required();
  est->add_option("--init", est_init, "key-point file with the t=0 initial guess");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_opts, gen_n, gen_steps, gen_domrand);
    if (train->parsed()) return cmd_train(train_opts, train_data, finetune_from, with_mlp, train_epochs);
    if (eval->parsed()) return cmd_eval_rollout(eval_opts, eval_ckpt, eval_data, eval_steps, eval_mlp);
    if (run->parsed()) return cmd_run(run_opts, run_ckpt, run_scenario, run_mode, run_scale);
    if (bench_cmd->parsed())
      return cmd_benchmark(bench_opts, bench_ckpt, bench_domrand, bench_modes, bench_threads);
    if (est->parsed()) return cmd_estimate(est_opts, est_clouds, est_init);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
