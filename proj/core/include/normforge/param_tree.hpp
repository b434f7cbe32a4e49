#pragma once

#include <vector>

#include "normforge/matrix.hpp"

namespace normforge {

/// Ordered product (W^1, ..., W^L, theta): one Matrix per hidden-layer slot
/// plus one flat vector holding all other parameters. The theta slot may be
/// empty; slot shapes are fixed for the lifetime of a run.
struct ParamTree {
  std::vector<Matrix> matrices;
  std::vector<double> base;

  /// Matrix slots plus the trailing base slot.
  std::size_t slot_count() const { return matrices.size() + 1; }

  bool same_shape(const ParamTree& other) const;
  bool all_finite() const;
  bool all_zero() const;

  void scale(double s);
  /// this += a * x
  void axpy(double a, const ParamTree& x);
  void fill(double value);
};

/// Zero tree with the same slot shapes.
ParamTree tree_like(const ParamTree& shape);

/// Euclidean inner product over all slots.
double tree_inner(const ParamTree& a, const ParamTree& b);

double tree_frobenius_norm(const ParamTree& a);
double tree_max_abs(const ParamTree& a);

}  // namespace normforge
