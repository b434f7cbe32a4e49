#include "normforge/presets.hpp"

#include <cmath>

#include "normforge/errors.hpp"

namespace normforge {

void VariantConfig::validate() const {
  if (!(eta_m > 0.0) || !(eta_b > 0.0)) throw ConfigError("variant: learning rates must be > 0");
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("variant: beta must be in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("variant: beta2 must be in [0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("variant: epsilon must be > 0");
  if (!std::isfinite(f_star)) throw ConfigError("variant: f_star must be finite");
}

std::string variant_name(const VariantConfig& cfg) {
  std::string name = cfg.sd_type == SdType::Constrained ? "csd" : "rsd";
  switch (cfg.product_norm) {
    case ProductNormKind::Inf: name += "_inf"; break;
    case ProductNormKind::L2: name += "_l2"; break;
    case ProductNormKind::Hybrid: name += "_hyb"; break;
  }
  switch (cfg.backup_norm) {
    case BackupNormKind::Inf: name += "_inf"; break;
    case BackupNormKind::AdaInf: name += "_adainf"; break;
    case BackupNormKind::Ada2: name += "_ada2"; break;
  }
  if (cfg.truncation) name += "_momo";
  if (cfg.stale) name += "_stale";
  return name;
}

std::string variant_alias(const VariantConfig& cfg) {
  std::string alias;
  if (cfg.sd_type == SdType::Constrained && cfg.product_norm == ProductNormKind::Inf &&
      cfg.backup_norm == BackupNormKind::AdaInf) {
    alias = "muonadam";
  } else if (cfg.sd_type == SdType::Constrained && cfg.product_norm == ProductNormKind::Inf &&
             cfg.backup_norm == BackupNormKind::Inf) {
    alias = "scion";
  } else if (cfg.sd_type == SdType::Regularized && cfg.product_norm == ProductNormKind::L2 &&
             cfg.backup_norm == BackupNormKind::Ada2) {
    alias = "polargrad";
  } else if (cfg.sd_type == SdType::Regularized && cfg.product_norm == ProductNormKind::Hybrid &&
             cfg.backup_norm == BackupNormKind::Ada2) {
    alias = "muonmax";
  } else {
    return variant_name(cfg);
  }
  if (cfg.truncation) alias += "-momo";
  if (cfg.stale) alias += "-stale";
  return alias;
}

VariantOptimizer::VariantOptimizer(VariantConfig cfg, const ParamTree& shape, PolarConfig polar)
    : cfg_(cfg), polar_(std::move(polar)), n_matrix_slots_(shape.matrices.size()) {
  cfg_.validate();
  state_ = OptState::like(shape);
}

NormSpec VariantOptimizer::current_spec() const {
  NormSpec spec;
  spec.polar = polar_;
  spec.slot_norms.reserve(n_matrix_slots_ + 1);
  for (std::size_t i = 0; i < n_matrix_slots_; ++i) {
    spec.slot_norms.push_back(AtomicNorm::spectral());
  }
  switch (cfg_.backup_norm) {
    case BackupNormKind::Inf:
      spec.slot_norms.push_back(AtomicNorm::maxabs());
      break;
    case BackupNormKind::AdaInf:
      spec.slot_norms.push_back(AtomicNorm::scaled(
          ada_inf_diag(state_.momentum.base, state_.second_moment, cfg_.epsilon),
          AtomicNorm::maxabs()));
      break;
    case BackupNormKind::Ada2:
      spec.slot_norms.push_back(AtomicNorm::scaled(
          ada2_diag(state_.second_moment, cfg_.epsilon), AtomicNorm::euclid()));
      break;
  }

  const double ratio = cfg_.eta_m / cfg_.eta_b;
  const std::size_t n = n_matrix_slots_ + 1;
  switch (cfg_.product_norm) {
    case ProductNormKind::Inf: {
      std::vector<double> w(n, 1.0);
      w.back() = ratio;
      spec.aggregator = ProductAggregator::max_agg(std::move(w));
      break;
    }
    case ProductNormKind::L2: {
      std::vector<double> w(n, 1.0);
      w.back() = std::sqrt(ratio);
      spec.aggregator = ProductAggregator::l2_agg(std::move(w));
      break;
    }
    case ProductNormKind::Hybrid:
      spec.aggregator = ProductAggregator::hybrid_agg(ratio);
      break;
  }
  return spec;
}

StepReport VariantOptimizer::step(ParamTree& w, const ParamTree& grads, double loss,
                                  double lr_mult) {
  momentum_update(state_, grads, cfg_.beta, cfg_.beta2);
  const double model_estimate =
      model_estimate_update(state_, loss, grads, w, cfg_.beta);

  const NormSpec spec = current_spec();
  const double eta = cfg_.eta_m * lr_mult;

  StepReport report;
  if (cfg_.truncation) {
    report = cfg_.sd_type == SdType::Constrained
                 ? momo_csd_step(w, state_, spec, eta, cfg_.f_star, cfg_.stale)
                 : momo_rsd_step(w, state_, spec, eta, cfg_.f_star, cfg_.stale);
  } else {
    report = cfg_.sd_type == SdType::Constrained ? csd_step(w, state_, spec, eta, cfg_.stale)
                                                 : rsd_step(w, state_, spec, eta, cfg_.stale);
  }
  report.model_estimate = model_estimate;
  ++state_.step;
  return report;
}

std::vector<VariantConfig> variant_grid(double eta_m, double eta_b, double beta, double beta2,
                                        double epsilon, double f_star) {
  std::vector<VariantConfig> grid;
  grid.reserve(36);
  for (bool trunc : {false, true}) {
    for (SdType sd : {SdType::Constrained, SdType::Regularized}) {
      for (ProductNormKind pn : {ProductNormKind::Inf, ProductNormKind::L2,
                                 ProductNormKind::Hybrid}) {
        for (BackupNormKind bn : {BackupNormKind::Inf, BackupNormKind::AdaInf,
                                  BackupNormKind::Ada2}) {
          VariantConfig cfg;
          cfg.sd_type = sd;
          cfg.product_norm = pn;
          cfg.backup_norm = bn;
          cfg.truncation = trunc;
          cfg.eta_m = eta_m;
          cfg.eta_b = eta_b;
          cfg.beta = beta;
          cfg.beta2 = beta2;
          cfg.epsilon = epsilon;
          cfg.f_star = f_star;
          grid.push_back(cfg);
        }
      }
    }
  }
  return grid;
}

StepReport muonadam_step(ParamTree& w, OptState& state, const ParamTree& grads, double eta_m,
                         double eta_b, double beta, double beta1, double beta2,
                         double epsilon, const PolarConfig& polar_cfg) {
  if (!w.same_shape(grads) || !w.same_shape(state.momentum)) {
    throw DimensionError("muonadam_step: shape mismatch");
  }

  const bool first = state.step == 0;
  for (std::size_t l = 0; l < w.matrices.size(); ++l) {
    Matrix& mom = state.momentum.matrices[l];
    if (first) {
      mom = grads.matrices[l];
    } else {
      mom *= beta;
      mom.axpy(1.0 - beta, grads.matrices[l]);
    }
    if (!mom.all_zero()) {
      w.matrices[l].axpy(-eta_m, polar(mom, polar_cfg));
    }
  }

  for (std::size_t i = 0; i < w.base.size(); ++i) {
    const double g = grads.base[i];
    double& m = state.momentum.base[i];
    double& v = state.second_moment[i];
    if (first) {
      m = g;
      v = g * g;
    } else {
      m = beta1 * m + (1.0 - beta1) * g;
      v = beta2 * v + (1.0 - beta2) * g * g;
    }
    w.base[i] -= eta_b * m / (std::sqrt(v) + epsilon);
  }

  ++state.step;
  StepReport report;
  report.effective_step_matrix = w.matrices.empty() ? 0.0 : eta_m;
  report.effective_step_base = w.base.empty() ? 0.0 : eta_b;
  report.step_coefficient = eta_m;
  return report;
}

StepReport muonmax_momo_step(ParamTree& w, OptState& state, const ParamTree& grads,
                             double loss, const VariantConfig& cfg, double lr_mult,
                             const PolarConfig& polar_cfg) {
  if (!w.same_shape(grads) || !w.same_shape(state.momentum)) {
    throw DimensionError("muonmax_momo_step: shape mismatch");
  }
  const double eta_m = cfg.eta_m * lr_mult;
  const double eta_b_over_m = cfg.eta_b / cfg.eta_m;

  momentum_update(state, grads, cfg.beta, cfg.beta2);
  const double model_estimate = model_estimate_update(state, loss, grads, w, cfg.beta);

  // polar factors and fresh nuclear norms (the LMO pays for both)
  const std::size_t n_mat = w.matrices.size();
  std::vector<Matrix> polars;
  std::vector<double> fresh_nuc(n_mat, 0.0);
  polars.reserve(n_mat);
  double fresh_sum = 0.0;
  for (std::size_t l = 0; l < n_mat; ++l) {
    const Matrix& mom = state.momentum.matrices[l];
    if (mom.all_zero()) {
      polars.emplace_back(mom.rows(), mom.cols());
    } else {
      polars.push_back(polar(mom, polar_cfg));
      fresh_nuc[l] = std::max(0.0, frob_inner(polars.back(), mom));
    }
    fresh_sum += fresh_nuc[l];
  }

  const bool use_stale = cfg.stale && state.stale_duals.size() == n_mat;
  const double nuc_sum = use_stale ? state.stale_total : fresh_sum;

  // theta dual term is cheap and always fresh: || m / sqrt(sqrt(v)+eps) ||_2
  double theta_term_sq = 0.0;
  for (std::size_t i = 0; i < state.momentum.base.size(); ++i) {
    const double mi = state.momentum.base[i];
    theta_term_sq += mi * mi / (std::sqrt(state.second_moment[i]) + cfg.epsilon);
  }
  const double d_total = std::sqrt(nuc_sum * nuc_sum + eta_b_over_m * theta_term_sq);

  const double trunc = std::max(0.0, model_estimate - cfg.f_star) /
                       std::max(d_total * d_total, 1e-12);
  const double coeff = std::min(eta_m, trunc);

  for (std::size_t l = 0; l < n_mat; ++l) {
    w.matrices[l].axpy(-coeff * nuc_sum, polars[l]);
  }
  const double theta_coeff = eta_b_over_m * coeff;
  for (std::size_t i = 0; i < w.base.size(); ++i) {
    w.base[i] -= theta_coeff * state.momentum.base[i] /
                 (std::sqrt(state.second_moment[i]) + cfg.epsilon);
  }

  stale_cache_update(state, fresh_nuc);
  ++state.step;

  StepReport report;
  report.effective_step_matrix = coeff * nuc_sum;
  report.effective_step_base = theta_coeff;
  report.model_estimate = model_estimate;
  report.dual_total = d_total;
  report.clamp_active = trunc < eta_m;
  report.step_coefficient = coeff;
  return report;
}

void adam_step(std::vector<double>& theta, OptState& state, std::span<const double> grads,
               double eta, double beta1, double beta2, double epsilon) {
  if (theta.size() != grads.size() || state.momentum.base.size() != theta.size() ||
      state.second_moment.size() != theta.size()) {
    throw DimensionError("adam_step: shape mismatch");
  }
  const bool first = state.step == 0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    double& m = state.momentum.base[i];
    double& v = state.second_moment[i];
    if (first) {
      m = grads[i];
      v = grads[i] * grads[i];
    } else {
      m = beta1 * m + (1.0 - beta1) * grads[i];
      v = beta2 * v + (1.0 - beta2) * grads[i] * grads[i];
    }
    theta[i] -= eta * m / (std::sqrt(v) + epsilon);
  }
  ++state.step;
}

}  // namespace normforge
