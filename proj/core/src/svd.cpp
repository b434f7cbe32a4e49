#include "normforge/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "normforge/errors.hpp"

namespace normforge {

namespace {

// One-sided Jacobi on the columns of a (rows >= cols assumed by caller).
// Rotations orthogonalize column pairs; v accumulates them.
void jacobi_sweeps(Matrix& a, Matrix& v) {
  const int n = a.cols();
  const int m = a.rows();
  const double tol = 1e-15;
  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (int i = 0; i < m; ++i) {
          alpha += a(i, p) * a(i, p);
          beta += a(i, q) * a(i, q);
          gamma += a(i, p) * a(i, q);
        }
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::fabs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < m; ++i) {
          const double ap = a(i, p), aq = a(i, q);
          a(i, p) = c * ap - s * aq;
          a(i, q) = s * ap + c * aq;
        }
        for (int i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }
}

SvdResult svd_tall(const Matrix& m) {
  Matrix a = m;
  Matrix v = Matrix::identity(m.cols());
  jacobi_sweeps(a, v);

  const int n = a.cols();
  std::vector<double> sigma(n, 0.0);
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i) s += a(i, j) * a(i, j);
    sigma[j] = std::sqrt(s);
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return sigma[x] > sigma[y]; });

  SvdResult out;
  out.u = Matrix(m.rows(), n);
  out.v = Matrix(m.cols(), n);
  out.singular_values.resize(n);
  for (int j = 0; j < n; ++j) {
    const int src = order[j];
    out.singular_values[j] = sigma[src];
    // columns of zero norm stay zero; they carry no weight in U diag(S) V^T
    const double inv = sigma[src] > 0.0 ? 1.0 / sigma[src] : 0.0;
    for (int i = 0; i < m.rows(); ++i) out.u(i, j) = a(i, src) * inv;
    for (int i = 0; i < m.cols(); ++i) out.v(i, j) = v(i, src);
  }
  return out;
}

}  // namespace

SvdResult svd_oracle(const Matrix& m) {
  if (m.empty()) throw DimensionError("svd_oracle: empty matrix");
  if (m.rows() > kSvdOracleMaxDim || m.cols() > kSvdOracleMaxDim) {
    throw OracleScopeError("svd_oracle: dimensions exceed oracle scale guard (" +
                           std::to_string(kSvdOracleMaxDim) + ")");
  }
  if (!m.all_finite()) throw NumericError("svd_oracle: non-finite input", 0);

  if (m.rows() >= m.cols()) return svd_tall(m);
  SvdResult t = svd_tall(m.transposed());
  return SvdResult{std::move(t.v), std::move(t.singular_values), std::move(t.u)};
}

}  // namespace normforge
