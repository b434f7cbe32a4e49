#pragma once

#include <span>
#include <vector>

#include "normforge/norms.hpp"
#include "normforge/param_tree.hpp"

namespace normforge {

/// Per-run mutable optimizer state. `step` counts completed steps; the
/// buffers are initialized from the first observation (m_0 = g_0,
/// v_0 = g_0^2), which removes the EMA cold-start bias without
/// bias-correction terms.
struct OptState {
  ParamTree momentum;                //< EMA of gradients, all slots
  std::vector<double> second_moment; //< EMA of squared gradients, base slot
  double f_tilde = 0.0;              //< Momo running scalar
  std::vector<double> stale_duals;   //< previous step's per-matrix-slot duals
  double stale_total = 0.0;          //< sum of stale_duals
  long step = 0;

  static OptState like(const ParamTree& shape);
};

/// Observability record for one update.
struct StepReport {
  double effective_step_matrix = 0.0;  //< largest matrix-slot step magnitude
  double effective_step_base = 0.0;    //< base-slot step magnitude
  double model_estimate = 0.0;         //< F~_t where tracked, else 0
  double dual_total = 0.0;             //< aggregated dual used by the update
  bool clamp_active = false;           //< min(.,.) picked the truncation branch
  double step_coefficient = 0.0;       //< min-clamp scalar r_t; <= eta always
};

/// M <- beta*M + (1-beta)*G on every slot; v <- beta2*v + (1-beta2)*g^2 on
/// the base slot. At state.step == 0 the buffers are set to G and g^2.
void momentum_update(OptState& state, const ParamTree& grads, double beta, double beta2);

/// Updates the Momo running average f~ and returns the model estimate
/// F~_t = f~_t + <m_t, w_t>. Call after momentum_update for the same step.
double model_estimate_update(OptState& state, double loss, const ParamTree& grads,
                             const ParamTree& w, double beta);

/// Constrained steepest descent: w += eta * LMO(m). Zero momentum skips the
/// update and reports effective step 0.
StepReport csd_step(ParamTree& w, OptState& state, const NormSpec& spec, double eta,
                    bool stale = false);

/// Regularized steepest descent: w += eta * ||m||_* * LMO(m).
StepReport rsd_step(ParamTree& w, OptState& state, const NormSpec& spec, double eta,
                    bool stale = false);

/// Truncated-model constrained step:
/// w += min(eta, (F~ - F_*)/||m||_*) * LMO(m), clamped to a zero step when
/// F~ <= F_*.
StepReport momo_csd_step(ParamTree& w, OptState& state, const NormSpec& spec, double eta,
                         double f_star, bool stale = false);

/// Truncated-model regularized step:
/// w += min(eta, (F~ - F_*)/||m||_*^2) * ||m||_* * LMO(m).
StepReport momo_rsd_step(ParamTree& w, OptState& state, const NormSpec& spec, double eta,
                         double f_star, bool stale = false);

/// Replaces the stale dual cache with this step's fresh per-matrix-slot
/// duals ("old_d = new_d"). The step functions call this after the update
/// consumed the previous values.
void stale_cache_update(OptState& state, std::span<const double> fresh_matrix_duals);

}  // namespace normforge
