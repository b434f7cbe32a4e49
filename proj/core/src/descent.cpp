#include "normforge/descent.hpp"

#include <cmath>

#include "normforge/errors.hpp"

namespace normforge {

namespace {

constexpr double kDenomFloor = 1e-12;

enum class StepMode { Csd, Rsd, MomoCsd, MomoRsd };

StepReport engine_step(ParamTree& w, OptState& state, const NormSpec& spec, double eta,
                       double f_star, bool stale, StepMode mode) {
  if (!(eta > 0.0)) throw ConfigError("steepest-descent step: eta must be > 0");
  if (!w.same_shape(state.momentum)) {
    throw DimensionError("steepest-descent step: state does not match parameters");
  }

  StepReport report;
  const ParamTree& m = state.momentum;
  if (m.all_zero()) {
    // no LMO exists; skip the update and leave the stale cache untouched
    return report;
  }

  SlotLmoParts parts = slot_lmos(spec, m);

  // stale variants reuse the previous step's matrix-slot duals; the base
  // slot's dual is cheap and always fresh
  std::vector<double> effective = parts.duals;
  const std::size_t n_mat = w.matrices.size();
  if (stale && state.stale_duals.size() == n_mat) {
    for (std::size_t i = 0; i < n_mat; ++i) effective[i] = state.stale_duals[i];
  }

  const AggregateResult agg = aggregate_duals(spec.aggregator, effective);
  const double dual_total = agg.dual_total;

  double coeff = eta;       // the min-clamp scalar; eta for plain steps
  double dual_factor = 1.0; // extra ||m||_* factor for regularized modes
  bool clamp = false;
  double model_estimate = 0.0;
  switch (mode) {
    case StepMode::Csd:
      break;
    case StepMode::Rsd:
      dual_factor = dual_total;
      break;
    case StepMode::MomoCsd: {
      model_estimate = state.f_tilde + tree_inner(m, w);
      const double trunc =
          std::max(0.0, model_estimate - f_star) / std::max(dual_total, kDenomFloor);
      clamp = trunc < eta;
      coeff = std::min(eta, trunc);
      break;
    }
    case StepMode::MomoRsd: {
      model_estimate = state.f_tilde + tree_inner(m, w);
      const double trunc = std::max(0.0, model_estimate - f_star) /
                           std::max(dual_total * dual_total, kDenomFloor);
      clamp = trunc < eta;
      coeff = std::min(eta, trunc);
      dual_factor = dual_total;
      break;
    }
  }

  const double scale = coeff * dual_factor;
  double max_matrix_step = 0.0;
  for (std::size_t i = 0; i < n_mat; ++i) {
    const double slot_scale = scale * agg.coefficients[i];
    w.matrices[i].axpy(slot_scale, parts.matrix_lmos[i]);
    max_matrix_step = std::max(max_matrix_step, std::fabs(slot_scale));
  }
  const double base_scale = scale * agg.coefficients.back();
  for (std::size_t i = 0; i < w.base.size(); ++i) {
    w.base[i] += base_scale * parts.base_lmo[i];
  }

  stale_cache_update(state, std::span<const double>(parts.duals).first(n_mat));

  report.effective_step_matrix = max_matrix_step;
  report.effective_step_base = std::fabs(base_scale);
  report.dual_total = dual_total;
  report.clamp_active = clamp;
  report.step_coefficient = coeff;
  report.model_estimate = model_estimate;
  return report;
}

}  // namespace

OptState OptState::like(const ParamTree& shape) {
  OptState s;
  s.momentum = tree_like(shape);
  s.second_moment.assign(shape.base.size(), 0.0);
  return s;
}

void momentum_update(OptState& state, const ParamTree& grads, double beta, double beta2) {
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("momentum_update: beta must be in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("momentum_update: beta2 must be in [0,1)");
  if (!state.momentum.same_shape(grads)) {
    throw DimensionError("momentum_update: gradient shape does not match state");
  }
  if (state.step == 0) {
    state.momentum = grads;
    for (std::size_t i = 0; i < grads.base.size(); ++i) {
      state.second_moment[i] = grads.base[i] * grads.base[i];
    }
    return;
  }
  state.momentum.scale(beta);
  state.momentum.axpy(1.0 - beta, grads);
  for (std::size_t i = 0; i < grads.base.size(); ++i) {
    state.second_moment[i] =
        beta2 * state.second_moment[i] + (1.0 - beta2) * grads.base[i] * grads.base[i];
  }
}

double model_estimate_update(OptState& state, double loss, const ParamTree& grads,
                             const ParamTree& w, double beta) {
  const double gw = tree_inner(grads, w);
  if (state.step == 0) {
    state.f_tilde = loss - gw;  // matches the m_0 = g_0 initialization
  } else {
    state.f_tilde = beta * state.f_tilde + (1.0 - beta) * (loss - gw);
  }
  return state.f_tilde + tree_inner(state.momentum, w);
}

StepReport csd_step(ParamTree& w, OptState& state, const NormSpec& spec, double eta,
                    bool stale) {
  return engine_step(w, state, spec, eta, 0.0, stale, StepMode::Csd);
}

StepReport rsd_step(ParamTree& w, OptState& state, const NormSpec& spec, double eta,
                    bool stale) {
  return engine_step(w, state, spec, eta, 0.0, stale, StepMode::Rsd);
}

StepReport momo_csd_step(ParamTree& w, OptState& state, const NormSpec& spec, double eta,
                         double f_star, bool stale) {
  return engine_step(w, state, spec, eta, f_star, stale, StepMode::MomoCsd);
}

StepReport momo_rsd_step(ParamTree& w, OptState& state, const NormSpec& spec, double eta,
                         double f_star, bool stale) {
  return engine_step(w, state, spec, eta, f_star, stale, StepMode::MomoRsd);
}

void stale_cache_update(OptState& state, std::span<const double> fresh_matrix_duals) {
  state.stale_duals.assign(fresh_matrix_duals.begin(), fresh_matrix_duals.end());
  state.stale_total = 0.0;
  for (double d : state.stale_duals) state.stale_total += d;
}

}  // namespace normforge
