#pragma once

namespace normforge {

/// Warmup-stable-decay schedule: linear warmup over the first warmup_frac
/// of steps, flat until stable_frac, then linear decay to
/// final_frac_of_peak at the last step.
struct ScheduleConfig {
  long total_steps = 0;
  double warmup_frac = 0.05;
  double stable_frac = 0.50;
  double final_frac_of_peak = 0.10;
};

/// Multiplier times eta_peak for step t in [0, total_steps]. The first
/// optimizer step uses t = 1 (warmup starts at 1/warmup_steps); t = 0
/// returns 0 and is never used by the training loop.
double lr_schedule(long t, const ScheduleConfig& sched, double eta_peak);

}  // namespace normforge
