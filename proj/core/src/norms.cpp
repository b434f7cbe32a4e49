#include "normforge/norms.hpp"

#include <cmath>

#include "normforge/errors.hpp"

namespace normforge {

namespace {

bool is_zero(std::span<const double> v) {
  for (double x : v) {
    if (x != 0.0) return false;
  }
  return true;
}

double l1(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::fabs(x);
  return s;
}

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double linf(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::fabs(x));
  return s;
}

void check_diag(const AtomicNorm& norm, std::size_t n) {
  if (norm.diag.size() != n) {
    throw DimensionError("Scaled norm: diagonal length does not match slot size");
  }
}

std::vector<double> scale_by_inverse_diag(const AtomicNorm& norm, std::span<const double> v) {
  std::vector<double> w(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) w[i] = v[i] / norm.diag[i];
  return w;
}

const std::vector<double>& ones(std::size_t n, std::vector<double>& storage) {
  storage.assign(n, 1.0);
  return storage;
}

}  // namespace

AtomicNorm AtomicNorm::scaled(std::vector<double> diag, AtomicNorm base_norm) {
  for (double d : diag) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw ConfigError("Scaled norm: diagonal entries must be strictly positive and finite");
    }
  }
  AtomicNorm n;
  n.kind = Kind::Scaled;
  n.diag = std::move(diag);
  n.base = std::make_shared<const AtomicNorm>(std::move(base_norm));
  return n;
}

std::vector<double> atomic_lmo(const AtomicNorm& norm, std::span<const double> v) {
  if (is_zero(v)) throw DegenerateInputError("atomic_lmo: zero input");
  switch (norm.kind) {
    case AtomicNorm::Kind::Euclid: {
      const double n = l2(v);
      std::vector<double> u(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) u[i] = -v[i] / n;
      return u;
    }
    case AtomicNorm::Kind::MaxAbs: {
      std::vector<double> u(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) u[i] = -sign0(v[i]);
      return u;
    }
    case AtomicNorm::Kind::Scaled: {
      check_diag(norm, v.size());
      std::vector<double> u = atomic_lmo(*norm.base, scale_by_inverse_diag(norm, v));
      for (std::size_t i = 0; i < v.size(); ++i) u[i] /= norm.diag[i];
      return u;
    }
    case AtomicNorm::Kind::Spectral:
      throw DimensionError("atomic_lmo: Spectral norm needs a matrix slot");
  }
  throw Error("atomic_lmo: unknown norm kind");
}

double atomic_dual(const AtomicNorm& norm, std::span<const double> v) {
  switch (norm.kind) {
    case AtomicNorm::Kind::Euclid:
      return l2(v);
    case AtomicNorm::Kind::MaxAbs:
      return l1(v);
    case AtomicNorm::Kind::Scaled: {
      check_diag(norm, v.size());
      const std::vector<double> w = scale_by_inverse_diag(norm, v);
      return atomic_dual(*norm.base, w);
    }
    case AtomicNorm::Kind::Spectral:
      throw DimensionError("atomic_dual: Spectral norm needs a matrix slot");
  }
  throw Error("atomic_dual: unknown norm kind");
}

double atomic_primal(const AtomicNorm& norm, std::span<const double> v) {
  switch (norm.kind) {
    case AtomicNorm::Kind::Euclid:
      return l2(v);
    case AtomicNorm::Kind::MaxAbs:
      return linf(v);
    case AtomicNorm::Kind::Scaled: {
      check_diag(norm, v.size());
      std::vector<double> w(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) w[i] = v[i] * norm.diag[i];
      return atomic_primal(*norm.base, w);
    }
    case AtomicNorm::Kind::Spectral:
      throw DimensionError("atomic_primal: Spectral norm needs a matrix slot");
  }
  throw Error("atomic_primal: unknown norm kind");
}

Matrix atomic_lmo(const AtomicNorm& norm, const Matrix& v, const PolarConfig& polar_cfg) {
  if (norm.kind == AtomicNorm::Kind::Spectral) {
    Matrix p = polar(v, polar_cfg);
    p *= -1.0;
    return p;
  }
  std::vector<double> flat = atomic_lmo(norm, v.data());
  return Matrix(v.rows(), v.cols(), std::move(flat));
}

double atomic_dual(const AtomicNorm& norm, const Matrix& v, const PolarConfig& polar_cfg) {
  if (norm.kind == AtomicNorm::Kind::Spectral) return nuclear_norm(v, polar_cfg);
  return atomic_dual(norm, v.data());
}

double atomic_primal(const AtomicNorm& norm, const Matrix& v) {
  if (norm.kind == AtomicNorm::Kind::Spectral) return spectral_norm(v, 100);
  return atomic_primal(norm, v.data());
}

ProductAggregator ProductAggregator::max_agg(std::vector<double> weights) {
  return {Kind::MaxAgg, 1.0, std::move(weights)};
}

ProductAggregator ProductAggregator::l2_agg(std::vector<double> weights) {
  return {Kind::L2Agg, 1.0, std::move(weights)};
}

ProductAggregator ProductAggregator::hybrid_agg(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("hybrid aggregator: lambda must be finite and > 0");
  }
  return {Kind::HybridAgg, lambda, {}};
}

AggregateResult aggregate_duals(const ProductAggregator& agg, std::span<const double> duals) {
  const std::size_t n = duals.size();
  if (n == 0) throw DimensionError("aggregate_duals: no slots");
  std::vector<double> w_storage;
  std::span<const double> w = agg.weights.empty() ? std::span<const double>(ones(n, w_storage))
                                                  : std::span<const double>(agg.weights);
  if (agg.kind != ProductAggregator::Kind::HybridAgg && w.size() != n) {
    throw DimensionError("aggregate_duals: weights length does not match slot count");
  }

  AggregateResult out;
  out.coefficients.assign(n, 0.0);
  switch (agg.kind) {
    case ProductAggregator::Kind::MaxAgg: {
      // f(r) = max_i w_i r_i; f_*(s) = sum_i s_i / w_i; phi_i = sign(s_i)/w_i.
      for (std::size_t i = 0; i < n; ++i) {
        out.dual_total += duals[i] / w[i];
        out.coefficients[i] = duals[i] > 0.0 ? 1.0 / w[i] : 0.0;
      }
      return out;
    }
    case ProductAggregator::Kind::L2Agg: {
      // f(r) = ||diag(w) r||_2; f_*(s) = ||diag(1/w) s||_2;
      // phi_i = (s_i / w_i^2) / f_*(s).
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double t = duals[i] / w[i];
        total += t * t;
      }
      out.dual_total = std::sqrt(total);
      if (out.dual_total > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
          out.coefficients[i] = duals[i] / (w[i] * w[i]) / out.dual_total;
        }
      }
      return out;
    }
    case ProductAggregator::Kind::HybridAgg: {
      // f(r) = sqrt(max_{i<n-1}(r_i)^2 + lambda r_base^2);
      // f_*(s) = sqrt((sum_matrix s_i)^2 + s_base^2 / lambda);
      // phi_i = sign(s_i) * (sum_matrix s)/d, phi_base = s_base/(lambda d).
      double msum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) msum += duals[i];
      const double sb = duals[n - 1];
      const double d = std::sqrt(msum * msum + sb * sb / agg.lambda);
      out.dual_total = d;
      if (d > 0.0) {
        for (std::size_t i = 0; i + 1 < n; ++i) {
          out.coefficients[i] = duals[i] > 0.0 ? msum / d : 0.0;
        }
        out.coefficients[n - 1] = sb / (agg.lambda * d);
      }
      return out;
    }
  }
  throw Error("aggregate_duals: unknown aggregator kind");
}

SlotLmoParts slot_lmos(const NormSpec& spec, const ParamTree& v) {
  if (spec.slot_norms.size() != v.slot_count()) {
    throw DimensionError("slot_lmos: slot_norms length does not match tree slot count");
  }
  SlotLmoParts parts;
  parts.duals.reserve(v.slot_count());

  for (std::size_t i = 0; i < v.matrices.size(); ++i) {
    const Matrix& m = v.matrices[i];
    const AtomicNorm& norm = spec.slot_norms[i];
    if (m.all_zero()) {
      parts.matrix_lmos.emplace_back(m.rows(), m.cols());
      parts.duals.push_back(0.0);
      continue;
    }
    Matrix lmo = atomic_lmo(norm, m, spec.polar);
    // dual = <-LMO(v), v>, the identity that makes nuclear norms cheap
    parts.duals.push_back(std::max(0.0, -frob_inner(lmo, m)));
    parts.matrix_lmos.push_back(std::move(lmo));
  }

  const AtomicNorm& base_norm = spec.slot_norms.back();
  if (v.base.empty() || is_zero(v.base)) {
    parts.base_lmo.assign(v.base.size(), 0.0);
    parts.duals.push_back(0.0);
  } else {
    parts.base_lmo = atomic_lmo(base_norm, v.base);
    double d = 0.0;
    for (std::size_t i = 0; i < v.base.size(); ++i) d -= parts.base_lmo[i] * v.base[i];
    parts.duals.push_back(std::max(0.0, d));
  }
  return parts;
}

std::vector<double> slot_dual_norms(const NormSpec& spec, const ParamTree& v) {
  if (spec.slot_norms.size() != v.slot_count()) {
    throw DimensionError("slot_dual_norms: slot_norms length does not match tree slot count");
  }
  std::vector<double> duals;
  duals.reserve(v.slot_count());
  for (std::size_t i = 0; i < v.matrices.size(); ++i) {
    duals.push_back(v.matrices[i].all_zero()
                        ? 0.0
                        : atomic_dual(spec.slot_norms[i], v.matrices[i], spec.polar));
  }
  duals.push_back(v.base.empty() ? 0.0 : atomic_dual(spec.slot_norms.back(), v.base));
  return duals;
}

ParamTree product_lmo(const NormSpec& spec, const ParamTree& v) {
  if (v.all_zero()) throw DegenerateInputError("product_lmo: all-zero tree");
  SlotLmoParts parts = slot_lmos(spec, v);
  AggregateResult agg = aggregate_duals(spec.aggregator, parts.duals);

  ParamTree out;
  out.matrices.reserve(v.matrices.size());
  for (std::size_t i = 0; i < v.matrices.size(); ++i) {
    Matrix m = std::move(parts.matrix_lmos[i]);
    m *= agg.coefficients[i];
    out.matrices.push_back(std::move(m));
  }
  out.base = std::move(parts.base_lmo);
  const double phi_base = agg.coefficients.back();
  for (double& x : out.base) x *= phi_base;
  return out;
}

double product_dual(const NormSpec& spec, const ParamTree& v) {
  return aggregate_duals(spec.aggregator, slot_dual_norms(spec, v)).dual_total;
}

double product_primal(const NormSpec& spec, const ParamTree& v) {
  if (spec.slot_norms.size() != v.slot_count()) {
    throw DimensionError("product_primal: slot_norms length does not match tree slot count");
  }
  const std::size_t n = v.slot_count();
  std::vector<double> primals;
  primals.reserve(n);
  for (std::size_t i = 0; i < v.matrices.size(); ++i) {
    primals.push_back(atomic_primal(spec.slot_norms[i], v.matrices[i]));
  }
  primals.push_back(v.base.empty() ? 0.0 : atomic_primal(spec.slot_norms.back(), v.base));

  const ProductAggregator& agg = spec.aggregator;
  std::vector<double> w_storage;
  std::span<const double> w = agg.weights.empty() ? std::span<const double>(ones(n, w_storage))
                                                  : std::span<const double>(agg.weights);
  switch (agg.kind) {
    case ProductAggregator::Kind::MaxAgg: {
      double m = 0.0;
      for (std::size_t i = 0; i < n; ++i) m = std::max(m, w[i] * primals[i]);
      return m;
    }
    case ProductAggregator::Kind::L2Agg: {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (w[i] * primals[i]) * (w[i] * primals[i]);
      return std::sqrt(s);
    }
    case ProductAggregator::Kind::HybridAgg: {
      double m = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) m = std::max(m, primals[i]);
      return std::sqrt(m * m + agg.lambda * primals[n - 1] * primals[n - 1]);
    }
  }
  throw Error("product_primal: unknown aggregator kind");
}

std::vector<double> ada_inf_diag(std::span<const double> momentum,
                                 std::span<const double> second_moment, double eps) {
  if (momentum.size() != second_moment.size()) {
    throw DimensionError("ada_inf_diag: momentum/second-moment size mismatch");
  }
  constexpr double kFloorDelta = 1e-12;
  std::vector<double> d(momentum.size());
  for (std::size_t i = 0; i < momentum.size(); ++i) {
    const double am = std::fabs(momentum[i]);
    // the paper's D is singular where m_i = 0; floor those entries to keep
    // the diagonal full rank (the slot still contributes no motion there)
    d[i] = momentum[i] != 0.0 ? (std::sqrt(second_moment[i]) + eps) / am
                              : eps / (am + kFloorDelta);
  }
  return d;
}

std::vector<double> ada2_diag(std::span<const double> second_moment, double eps) {
  std::vector<double> d(second_moment.size());
  for (std::size_t i = 0; i < second_moment.size(); ++i) {
    d[i] = std::sqrt(std::sqrt(second_moment[i]) + eps);
  }
  return d;
}

}  // namespace normforge
