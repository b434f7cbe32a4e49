#pragma once

#include <array>
#include <vector>

#include "normforge/matrix.hpp"

namespace normforge {

/// Configuration of the odd-polynomial polar iteration. Each iteration k
/// applies p(x) = a*x + b*x^3 + c*x^5 to the singular values via
/// X <- a*X + (b*A + c*A^2)*X with A = X*X^T. If the table is shorter than
/// `iterations`, the terminal triple is reused.
struct PolarConfig {
  int iterations = 6;
  /// Coefficient triples (a, b, c); empty means the built-in default table.
  std::vector<std::array<double, 3>> coefficient_table;
  /// Divide by an upper bound of the spectral norm before iterating.
  bool spectral_prescale = true;
  /// Power-iteration sweeps used to estimate that bound.
  int prescale_power_iters = 100;
};

/// The shipped coefficient table (greedy minimax quintics designed for
/// scaled singular values in [0.005, 1]).
const std::vector<std::array<double, 3>>& default_polar_table();

/// Approximate polar factor U V^T of the reduced SVD M = U S V^T.
/// Throws DegenerateInputError on the zero matrix and NumericError (with
/// the iteration index) if the iteration produces non-finite values.
Matrix polar(const Matrix& m, const PolarConfig& cfg = {});

/// Nuclear norm via the LMO identity <polar(M), M>; returns 0 for the
/// zero matrix.
double nuclear_norm(const Matrix& m, const PolarConfig& cfg = {});

/// Power-iteration estimate of the largest singular value (never above
/// the true value). Returns 0 for the zero matrix.
double spectral_norm(const Matrix& m, int iters);

}  // namespace normforge
