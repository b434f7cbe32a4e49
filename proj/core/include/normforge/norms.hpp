#pragma once

#include <memory>
#include <span>
#include <vector>

#include "normforge/matrix.hpp"
#include "normforge/param_tree.hpp"
#include "normforge/polar.hpp"

namespace normforge {

/// An atomic norm assigned to one parameter slot.
///
/// Euclid   : ||v||_2,  LMO(v) = -v/||v||_2,        dual = ||v||_2
/// MaxAbs   : ||v||_inf, LMO(v) = -sign(v),          dual = ||v||_1
/// Spectral : sigma_max, LMO(M) = -polar(M),         dual = nuclear norm
/// Scaled   : ||D v|| for a positive diagonal D and a base norm;
///            LMO(v) = D^-1 LMO_base(D^-1 v), dual = dual_base(D^-1 v).
struct AtomicNorm {
  enum class Kind { Euclid, MaxAbs, Spectral, Scaled };

  Kind kind = Kind::Euclid;
  std::vector<double> diag;                // Scaled only; entries > 0, finite
  std::shared_ptr<const AtomicNorm> base;  // Scaled only

  static AtomicNorm euclid() { return {Kind::Euclid, {}, nullptr}; }
  static AtomicNorm maxabs() { return {Kind::MaxAbs, {}, nullptr}; }
  static AtomicNorm spectral() { return {Kind::Spectral, {}, nullptr}; }
  static AtomicNorm scaled(std::vector<double> diag, AtomicNorm base_norm);
};

/// sign with sign(0) = 0, the convention used by the MaxAbs LMO.
inline double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Vector-slot forms. The LMO requires v != 0; duals and primals accept 0.
std::vector<double> atomic_lmo(const AtomicNorm& norm, std::span<const double> v);
double atomic_dual(const AtomicNorm& norm, std::span<const double> v);
double atomic_primal(const AtomicNorm& norm, std::span<const double> v);

// Matrix-slot forms. Spectral needs the polar configuration; elementwise
// norms treat the matrix as its flattened data. atomic_primal for Spectral
// uses a power-iteration estimate.
Matrix atomic_lmo(const AtomicNorm& norm, const Matrix& v, const PolarConfig& polar_cfg);
double atomic_dual(const AtomicNorm& norm, const Matrix& v, const PolarConfig& polar_cfg);
double atomic_primal(const AtomicNorm& norm, const Matrix& v);

/// How per-slot norms combine into one norm on the whole tree.
///
/// MaxAgg    : f(r) = max_i w_i r_i
/// L2Agg     : f(r) = sqrt(sum_i (w_i r_i)^2)
/// HybridAgg : f(r) = sqrt(max_{i<n-1}(r_i)^2 + lambda * r_{n-1}^2) —
///             the matrix slots sit under an inner max and the final
///             (base) slot is weighted by lambda.
struct ProductAggregator {
  enum class Kind { MaxAgg, L2Agg, HybridAgg };

  Kind kind = Kind::MaxAgg;
  double lambda = 1.0;          // HybridAgg only; > 0
  std::vector<double> weights;  // MaxAgg/L2Agg; empty means all ones

  static ProductAggregator max_agg(std::vector<double> weights = {});
  static ProductAggregator l2_agg(std::vector<double> weights = {});
  static ProductAggregator hybrid_agg(double lambda);
};

/// Declarative description of a product norm: one atomic norm per tree slot
/// (matrix slots first, base slot last) plus the aggregator.
struct NormSpec {
  std::vector<AtomicNorm> slot_norms;
  ProductAggregator aggregator;
  PolarConfig polar;
};

/// Per-slot LMO directions and dual norms, computed in one pass (each
/// matrix slot runs polar once; its dual falls out as <polar(M), M>).
/// Zero slots get a zero LMO and dual 0.
struct SlotLmoParts {
  std::vector<Matrix> matrix_lmos;
  std::vector<double> base_lmo;
  std::vector<double> duals;  // one per slot, base slot last
};
SlotLmoParts slot_lmos(const NormSpec& spec, const ParamTree& v);

/// Per-slot dual norms only (base slot last).
std::vector<double> slot_dual_norms(const NormSpec& spec, const ParamTree& v);

/// Aggregation closed forms: coefficients phi_i = -LMO_f(duals) and the
/// aggregated dual total f_*(duals).
struct AggregateResult {
  std::vector<double> coefficients;
  double dual_total = 0.0;
};
AggregateResult aggregate_duals(const ProductAggregator& agg, std::span<const double> duals);

/// LMO of the product norm (coefficients applied to the slot LMOs).
/// Throws DegenerateInputError on an all-zero tree.
ParamTree product_lmo(const NormSpec& spec, const ParamTree& v);

/// Dual norm of the product norm; 0 for the zero tree.
double product_dual(const NormSpec& spec, const ParamTree& v);

/// Primal product norm (Spectral slots via power iteration).
double product_primal(const NormSpec& spec, const ParamTree& v);

/// Diagonal for the ada-infinity norm of a state (m, v): entries
/// (sqrt(v_i)+eps)/|m_i|, with zero-momentum entries floored to keep the
/// diagonal full rank.
std::vector<double> ada_inf_diag(std::span<const double> momentum,
                                 std::span<const double> second_moment, double eps);

/// Diagonal for the ada-2 norm: sqrt(sqrt(v_i)+eps).
std::vector<double> ada2_diag(std::span<const double> second_moment, double eps);

}  // namespace normforge
