#pragma once

#include <vector>

#include "normforge/matrix.hpp"

namespace normforge {

/// Reduced SVD: m = u * diag(singular_values) * v^T with u (rows x r),
/// v (cols x r), r = min(rows, cols), singular values sorted descending.
struct SvdResult {
  Matrix u;
  std::vector<double> singular_values;
  Matrix v;
};

/// Exact-to-machine-precision reduced SVD by one-sided Jacobi rotations.
/// Verification oracle only: dimensions are capped at kSvdOracleMaxDim.
inline constexpr int kSvdOracleMaxDim = 16;

SvdResult svd_oracle(const Matrix& m);

}  // namespace normforge
