#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "normforge/polar.hpp"

namespace normforge {

/// One acceptance-criterion record. `measured` compares against
/// `tolerance` as measured <= tolerance.
struct CriterionResult {
  std::string name;
  double tolerance = 0.0;
  double measured = 0.0;
  bool pass = false;
  double runtime_sec = 0.0;
  std::string detail;
};

struct VerifyOptions {
  /// Multiplies every tolerance (tighten with values < 1 to demonstrate
  /// the failure reporting).
  double tol_scale = 1.0;
  /// Run only the named criteria (empty = all).
  std::vector<std::string> only;
  /// Polar configuration used throughout (overridable for fault injection).
  PolarConfig polar;
  /// Worker threads for the sweep-heavy criteria.
  int workers = 4;
  /// Scratch directory for training runs (defaults to a temp dir).
  std::filesystem::path scratch_dir;
};

/// Runs the acceptance criteria and returns one record per criterion. If
/// `progress` is non-null, a pass/fail line is printed as each criterion
/// finishes.
std::vector<CriterionResult> run_verify(const VerifyOptions& opts,
                                        std::ostream* progress = nullptr);

bool all_passed(const std::vector<CriterionResult>& results);

/// JSON rendering of the report (one record per criterion).
std::string verify_report_json(const std::vector<CriterionResult>& results);

}  // namespace normforge
