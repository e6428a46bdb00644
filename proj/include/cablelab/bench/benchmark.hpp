#pragma once

#include "cablelab/config.hpp"
#include "cablelab/gnn/model.hpp"
#include "cablelab/mpc/task.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cablelab::bench {

struct CellResult {
  std::string scenario;
  double scale = 1.0;
  std::string mode;
  int trial = 0;  // seed index
  double terminal_error_cm = 0.0;
  double settling_time_s = 0.0;
  int steps = 0;
  bool settled = false;
  std::string error_cause;
};

struct Aggregate {
  double error_mean = 0.0, error_std = 0.0;
  double settle_mean = 0.0, settle_std = 0.0;
  int count = 0;
};

struct BenchmarkReport {
  std::vector<CellResult> rows;  // |scenarios| * |scales| * |modes| * |seeds|
  // Aggregated per (scenario, mode) over scales and seeds, matching the
  // five-trial stiffness protocol of the comparison tables.
  std::vector<std::tuple<std::string, std::string, Aggregate>> by_scenario_mode;
};

// Runs the full grid. `model` backs direct/hybrid/finetune; `domrand_model`
// is required when the domrand mode is in the grid. Per-cell task logs land
// in out_dir, written atomically; cells run on a small thread pool and the
// report is assembled in deterministic order.
BenchmarkReport run_benchmark(const RunConfig& cfg, const gnn::GnnModel* model,
                              const gnn::GnnModel* domrand_model, const std::string& out_dir);

void write_report_csv(const BenchmarkReport& report, const std::string& path);
void write_report_json(const BenchmarkReport& report, const std::string& path);

// Deterministic per-cell seed derivation.
std::uint64_t cell_seed(std::uint64_t base, const std::string& scenario, double scale,
                        const std::string& mode, int trial);

}  // namespace cablelab::bench
