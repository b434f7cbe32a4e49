#pragma once

#include <string>
#include <vector>

#include "normforge/descent.hpp"
#include "normforge/norms.hpp"
#include "normforge/param_tree.hpp"

namespace normforge {

enum class SdType { Constrained, Regularized };
enum class ProductNormKind { Inf, L2, Hybrid };
enum class BackupNormKind { Inf, AdaInf, Ada2 };

/// One point of the optimizer design grid: steepest-descent type, product
/// norm, norm for the non-matrix parameters, truncation, staleness, and
/// the scalar hyperparameters. The (sd_type, product_norm, backup_norm,
/// truncation) combinations span the 36-variant grid.
struct VariantConfig {
  SdType sd_type = SdType::Constrained;
  ProductNormKind product_norm = ProductNormKind::Inf;
  BackupNormKind backup_norm = BackupNormKind::AdaInf;
  bool truncation = false;
  bool stale = false;
  double eta_m = 0.01;
  double eta_b = 0.01;
  double beta = 0.95;
  double beta2 = 0.95;
  double epsilon = 1e-8;
  double f_star = 0.0;

  void validate() const;
};

/// Canonical tuple name, e.g. "csd_inf_adainf" (+ "_momo"/"_stale").
std::string variant_name(const VariantConfig& cfg);
/// Known alias for named points of the grid ("muonadam", "scion",
/// "polargrad", "muonmax", with "-momo" when truncated) or the tuple name.
std::string variant_alias(const VariantConfig& cfg);

/// A variant instantiated against a fixed parameter-tree shape. Each step
/// rebuilds the state-dependent (ada) norms, runs the momentum/Momo
/// bookkeeping, and applies the selected engine update.
class VariantOptimizer {
 public:
  VariantOptimizer(VariantConfig cfg, const ParamTree& shape, PolarConfig polar = {});

  /// One optimizer step. lr_mult scales both learning rates jointly.
  StepReport step(ParamTree& w, const ParamTree& grads, double loss, double lr_mult = 1.0);

  const OptState& state() const { return state_; }
  OptState& state() { return state_; }
  const VariantConfig& config() const { return cfg_; }

  /// The NormSpec the next step would use, given current state.
  NormSpec current_spec() const;

 private:
  VariantConfig cfg_;
  PolarConfig polar_;
  std::size_t n_matrix_slots_;
  OptState state_;
};

/// Factory for the full design grid: 2 x 3 x 3 x {truncation on/off} = 36
/// variants sharing the given hyperparameters.
std::vector<VariantConfig> variant_grid(double eta_m, double eta_b, double beta,
                                        double beta2, double epsilon, double f_star);

/// Direct side-by-side implementation (matrices via polar, theta via Adam
/// with its own beta1), kept independent of the generic engine so the
/// equivalence tests have an oracle. Maintains the buffers in `state`.
StepReport muonadam_step(ParamTree& w, OptState& state, const ParamTree& grads,
                         double eta_m, double eta_b, double beta, double beta1,
                         double beta2, double epsilon, const PolarConfig& polar = {});

/// Direct truncated hybrid-norm update (closed form), with optional stale
/// nuclear-norm reuse; the oracle counterpart of the generic path.
StepReport muonmax_momo_step(ParamTree& w, OptState& state, const ParamTree& grads,
                             double loss, const VariantConfig& cfg, double lr_mult = 1.0,
                             const PolarConfig& polar = {});

/// Plain Adam on a flat vector (no bias correction; buffers initialized
/// from the first observation). Uses state.momentum.base / second_moment.
void adam_step(std::vector<double>& theta, OptState& state, std::span<const double> grads,
               double eta, double beta1, double beta2, double epsilon);

}  // namespace normforge
