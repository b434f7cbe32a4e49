#include "normforge/param_tree.hpp"

#include <cmath>

#include "normforge/errors.hpp"

namespace normforge {

bool ParamTree::same_shape(const ParamTree& other) const {
  if (matrices.size() != other.matrices.size() || base.size() != other.base.size()) {
    return false;
  }
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    if (!matrices[i].same_shape(other.matrices[i])) return false;
  }
  return true;
}

bool ParamTree::all_finite() const {
  for (const auto& m : matrices) {
    if (!m.all_finite()) return false;
  }
  for (double x : base) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool ParamTree::all_zero() const {
  for (const auto& m : matrices) {
    if (!m.all_zero()) return false;
  }
  for (double x : base) {
    if (x != 0.0) return false;
  }
  return true;
}

void ParamTree::scale(double s) {
  for (auto& m : matrices) m *= s;
  for (double& x : base) x *= s;
}

void ParamTree::axpy(double a, const ParamTree& x) {
  if (!same_shape(x)) throw DimensionError("ParamTree::axpy: shape mismatch");
  for (std::size_t i = 0; i < matrices.size(); ++i) matrices[i].axpy(a, x.matrices[i]);
  for (std::size_t i = 0; i < base.size(); ++i) base[i] += a * x.base[i];
}

void ParamTree::fill(double value) {
  for (auto& m : matrices) {
    for (double& x : m.data()) x = value;
  }
  for (double& x : base) x = value;
}

ParamTree tree_like(const ParamTree& shape) {
  ParamTree t = shape;
  t.fill(0.0);
  return t;
}

double tree_inner(const ParamTree& a, const ParamTree& b) {
  if (!a.same_shape(b)) throw DimensionError("tree_inner: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.matrices.size(); ++i) {
    s += frob_inner(a.matrices[i], b.matrices[i]);
  }
  for (std::size_t i = 0; i < a.base.size(); ++i) s += a.base[i] * b.base[i];
  return s;
}

double tree_frobenius_norm(const ParamTree& a) {
  return std::sqrt(tree_inner(a, a));
}

double tree_max_abs(const ParamTree& a) {
  double m = 0.0;
  for (const auto& mat : a.matrices) m = std::max(m, mat.max_abs());
  for (double x : a.base) m = std::max(m, std::fabs(x));
  return m;
}

}  // namespace normforge
