#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "normforge/dataset.hpp"
#include "normforge/model.hpp"
#include "normforge/presets.hpp"
#include "normforge/schedule.hpp"

namespace normforge {

/// Full experiment description. Parsed from a flat key=value file with
/// dotted sections (variant.*, schedule.*, model.*, data.*); every key has
/// a default, unknown keys are hard errors.
struct RunConfig {
  VariantConfig variant;
  ScheduleConfig schedule;  // total_steps 0 means "use `steps`"
  ModelSpec model{{8, 16, 4}, Activation::Tanh, LossKind::Mse, 7};
  DatasetSpec data;
  long steps = 100;
  int batch_size = 32;
  int log_every = 10;
  std::filesystem::path out_dir = "runs/run";
  std::uint64_t seed = 0;

  void validate() const;
  /// Flat echo of every key (for summary provenance).
  std::map<std::string, std::string> flatten() const;
};

RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& path);

}  // namespace normforge
