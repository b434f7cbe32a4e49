#include "normforge/schedule.hpp"

#include <cmath>

#include "normforge/errors.hpp"

namespace normforge {

double lr_schedule(long t, const ScheduleConfig& sched, double eta_peak) {
  const long total = sched.total_steps;
  if (total < 0) throw ConfigError("lr_schedule: total_steps must be >= 0");
  if (t < 0 || t > total) {
    throw ConfigError("lr_schedule: step " + std::to_string(t) + " outside [0, " +
                      std::to_string(total) + "]");
  }
  if (!(sched.warmup_frac >= 0.0 && sched.warmup_frac <= sched.stable_frac &&
        sched.stable_frac <= 1.0)) {
    throw ConfigError("lr_schedule: need 0 <= warmup_frac <= stable_frac <= 1");
  }
  if (!(sched.final_frac_of_peak > 0.0 && sched.final_frac_of_peak <= 1.0)) {
    throw ConfigError("lr_schedule: final_frac_of_peak must be in (0, 1]");
  }
  if (total == 0) return 0.0;

  const long warmup_steps = std::lround(sched.warmup_frac * static_cast<double>(total));
  const long stable_end = std::lround(sched.stable_frac * static_cast<double>(total));

  double mult;
  if (t <= warmup_steps && warmup_steps > 0) {
    mult = static_cast<double>(t) / static_cast<double>(warmup_steps);
  } else if (t <= stable_end || stable_end >= total) {
    mult = 1.0;
  } else {
    const double progress = static_cast<double>(t - stable_end) /
                            static_cast<double>(total - stable_end);
    mult = 1.0 + progress * (sched.final_frac_of_peak - 1.0);
  }
  return mult * eta_peak;
}

}  // namespace normforge
