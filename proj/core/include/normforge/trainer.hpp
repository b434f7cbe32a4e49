#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "normforge/config.hpp"

namespace normforge {

/// Outcome of one training run. Losses are per-step minibatch losses
/// evaluated before the update (the usual training-log convention).
struct RunSummary {
  std::string status = "ok";  // "ok" | "diverged"
  long steps_completed = 0;
  double initial_loss = 0.0;
  std::optional<double> final_loss;
  std::optional<double> mean_last_10pct;
  double wall_time_sec = 0.0;
  double clamp_rate = 0.0;
  bool any_clamp = false;
  /// max over steps of (step coefficient - scheduled eta); the Momo
  /// min-clamp invariant demands this never exceeds ~0.
  double max_coeff_excess = 0.0;
  std::map<std::string, std::string> config_echo;
  std::filesystem::path run_dir;
};

/// Executes a run, writing log.csv (columns: step, train_loss, lr_mult,
/// eff_step_matrix, eff_step_base, dual_total, model_estimate,
/// clamp_active) and summary.json under cfg.out_dir. A non-finite loss
/// aborts with status "diverged"; the partial CSV is retained.
RunSummary run_training(const RunConfig& cfg);

/// Joint learning-rate sweep: every run uses LRs (rho*eta_m, rho*eta_b).
struct SweepConfig {
  RunConfig base;
  std::vector<double> rho_grid;
  std::vector<std::uint64_t> seeds;
  int workers = 1;
  double tau_rob = 0.10;  // robust = mean loss within 10% of the best rho
};

struct SweepRow {
  std::string variant;
  double rho = 1.0;
  std::uint64_t seed = 0;
  std::optional<double> final_loss;
  std::string status = "ok";
};

struct RhoAggregate {
  double rho = 1.0;
  std::optional<double> mean;
  std::optional<double> stddev;
  int n_ok = 0;
  int n_total = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<RhoAggregate> aggregates;
  /// Fraction of rho values whose mean loss is within tau_rob of the sweep
  /// minimum (only rho values with every seed finishing are candidates).
  double robustness_fraction = 0.0;
  std::filesystem::path out_dir;
};

/// Runs |rho_grid| x |seeds| runs (optionally on a worker pool; each run
/// owns its output directory) and writes sweep.csv, sweep_aggregate.csv
/// and sweep_summary.json under base.out_dir.
SweepResult run_sweep(const SweepConfig& cfg);

/// Re-aggregates an existing sweep.csv without re-running anything.
SweepResult report_from_dir(const std::filesystem::path& dir, double tau_rob = 0.10);

/// Aggregation shared by run_sweep and report_from_dir.
void aggregate_sweep(SweepResult& result, double tau_rob);

}  // namespace normforge
