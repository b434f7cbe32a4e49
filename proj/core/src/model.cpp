#include "normforge/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "normforge/errors.hpp"
#include "normforge/rng.hpp"

namespace normforge {

namespace {

void check_batch(const ModelSpec& spec, const Batch& batch) {
  if (batch.inputs.cols() != spec.layer_dims.front()) {
    throw DimensionError("batch inputs do not match the model's input width");
  }
  const int n = batch.inputs.rows();
  if (spec.loss == LossKind::Mse) {
    if (batch.target_values.rows() != n ||
        batch.target_values.cols() != spec.layer_dims.back()) {
      throw DimensionError("batch target values do not match the model's output width");
    }
  } else {
    if (static_cast<int>(batch.target_classes.size()) != n) {
      throw DimensionError("batch target classes do not match the batch size");
    }
    for (int c : batch.target_classes) {
      if (c < 0 || c >= spec.layer_dims.back()) {
        throw ConfigError("batch target class out of range");
      }
    }
  }
}

// Z = A * W^T + 1 b^T
Matrix affine(const Matrix& a, const Matrix& w, std::span<const double> bias) {
  Matrix z = matmul_nt(a, w);
  for (int r = 0; r < z.rows(); ++r) {
    for (int c = 0; c < z.cols(); ++c) z(r, c) += bias[c];
  }
  return z;
}

}  // namespace

void ModelSpec::validate() const {
  if (layer_dims.size() < 2) {
    throw ConfigError("model: layer_dims needs at least an input and an output width");
  }
  for (int d : layer_dims) {
    if (d < 1) throw ConfigError("model: layer dims must be >= 1");
  }
  if (loss == LossKind::SoftmaxXent && layer_dims.back() < 2) {
    throw ConfigError("model: softmax cross-entropy needs >= 2 output classes");
  }
}

Mlp::Mlp(ModelSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

ParamTree Mlp::zero_params() const {
  ParamTree p;
  std::size_t bias_total = 0;
  for (std::size_t l = 0; l + 1 < spec_.layer_dims.size(); ++l) {
    p.matrices.emplace_back(spec_.layer_dims[l + 1], spec_.layer_dims[l]);
    bias_total += static_cast<std::size_t>(spec_.layer_dims[l + 1]);
  }
  p.base.assign(bias_total, 0.0);
  return p;
}

ParamTree Mlp::init_params() const {
  ParamTree p = zero_params();
  Rng rng(mix_seed(spec_.seed, 0x6d6c7021ULL));
  for (auto& w : p.matrices) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (double& x : w.data()) x = scale * rng.normal();
  }
  return p;
}

double Mlp::forward_impl(const ParamTree& params, const Batch& batch,
                         std::vector<std::uint8_t>* relu_pattern) const {
  check_batch(spec_, batch);
  const std::size_t n_layers = params.matrices.size();

  Matrix a = batch.inputs;
  std::size_t bias_off = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Matrix& w = params.matrices[l];
    Matrix z = affine(a, w, std::span<const double>(params.base).subspan(bias_off, w.rows()));
    bias_off += static_cast<std::size_t>(w.rows());
    if (l + 1 < n_layers) {
      if (spec_.activation == Activation::Tanh) {
        for (double& x : z.data()) x = std::tanh(x);
      } else {
        for (double& x : z.data()) {
          if (relu_pattern) relu_pattern->push_back(x > 0.0 ? 1 : 0);
          x = x > 0.0 ? x : 0.0;
        }
      }
    }
    a = std::move(z);
  }

  const int n = a.rows();
  double loss = 0.0;
  if (spec_.loss == LossKind::Mse) {
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < a.cols(); ++c) {
        const double d = a(r, c) - batch.target_values(r, c);
        loss += d * d;
      }
    }
  } else {
    for (int r = 0; r < n; ++r) {
      double mx = a(r, 0);
      for (int c = 1; c < a.cols(); ++c) mx = std::max(mx, a(r, c));
      double se = 0.0;
      for (int c = 0; c < a.cols(); ++c) se += std::exp(a(r, c) - mx);
      loss += mx + std::log(se) - a(r, batch.target_classes[r]);
    }
  }
  return loss / static_cast<double>(n);
}

double Mlp::forward_loss(const ParamTree& params, const Batch& batch) const {
  return forward_impl(params, batch, nullptr);
}

std::pair<double, ParamTree> Mlp::backward(const ParamTree& params, const Batch& batch) const {
  check_batch(spec_, batch);
  const std::size_t n_layers = params.matrices.size();
  const int n = batch.inputs.rows();

  // forward, keeping activations
  std::vector<Matrix> acts;  // acts[l] = input to layer l
  acts.reserve(n_layers + 1);
  acts.push_back(batch.inputs);
  std::size_t bias_off = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Matrix& w = params.matrices[l];
    Matrix z = affine(acts.back(), w,
                      std::span<const double>(params.base).subspan(bias_off, w.rows()));
    bias_off += static_cast<std::size_t>(w.rows());
    if (l + 1 < n_layers) {
      if (spec_.activation == Activation::Tanh) {
        for (double& x : z.data()) x = std::tanh(x);
      } else {
        for (double& x : z.data()) x = x > 0.0 ? x : 0.0;
      }
    }
    acts.push_back(std::move(z));
  }

  const Matrix& out = acts.back();
  double loss = 0.0;
  Matrix dz(out.rows(), out.cols());
  if (spec_.loss == LossKind::Mse) {
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < out.cols(); ++c) {
        const double d = out(r, c) - batch.target_values(r, c);
        loss += d * d;
        dz(r, c) = 2.0 * d / static_cast<double>(n);
      }
    }
  } else {
    for (int r = 0; r < n; ++r) {
      double mx = out(r, 0);
      for (int c = 1; c < out.cols(); ++c) mx = std::max(mx, out(r, c));
      double se = 0.0;
      for (int c = 0; c < out.cols(); ++c) se += std::exp(out(r, c) - mx);
      loss += mx + std::log(se) - out(r, batch.target_classes[r]);
      for (int c = 0; c < out.cols(); ++c) {
        const double p = std::exp(out(r, c) - mx) / se;
        dz(r, c) = (p - (c == batch.target_classes[r] ? 1.0 : 0.0)) / static_cast<double>(n);
      }
    }
  }
  loss /= static_cast<double>(n);

  ParamTree grads = tree_like(params);
  std::size_t bias_end = params.base.size();
  for (std::size_t l = n_layers; l-- > 0;) {
    const Matrix& w = params.matrices[l];
    const std::size_t rows = static_cast<std::size_t>(w.rows());
    bias_end -= rows;

    grads.matrices[l] = matmul_tn(dz, acts[l]);
    for (int r = 0; r < dz.rows(); ++r) {
      for (int c = 0; c < dz.cols(); ++c) grads.base[bias_end + c] += dz(r, c);
    }

    if (l == 0) break;
    Matrix da = matmul(dz, w);
    const Matrix& act = acts[l];  // post-activation output of layer l-1
    if (spec_.activation == Activation::Tanh) {
      for (int r = 0; r < da.rows(); ++r) {
        for (int c = 0; c < da.cols(); ++c) da(r, c) *= 1.0 - act(r, c) * act(r, c);
      }
    } else {
      for (int r = 0; r < da.rows(); ++r) {
        for (int c = 0; c < da.cols(); ++c) da(r, c) *= act(r, c) > 0.0 ? 1.0 : 0.0;
      }
    }
    dz = std::move(da);
  }

  return {loss, std::move(grads)};
}

double Mlp::finite_diff_check(const ParamTree& params, const Batch& batch, double h,
                              int min_coords, std::uint64_t seed) const {
  if (!(h > 0.0)) throw ConfigError("finite_diff_check: h must be > 0");
  auto [loss, grads] = backward(params, batch);
  (void)loss;

  std::size_t total = params.base.size();
  for (const auto& m : params.matrices) total += m.size();

  const std::size_t want = std::min<std::size_t>(total, static_cast<std::size_t>(min_coords));
  std::vector<std::size_t> coords(total);
  std::iota(coords.begin(), coords.end(), 0);
  Rng rng(mix_seed(seed, 0xfd1fULL));
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i, total - 1));
    std::swap(coords[i], coords[j]);
  }

  auto coord_ref = [](ParamTree& t, std::size_t idx) -> double& {
    for (auto& m : t.matrices) {
      if (idx < m.size()) return m.data()[idx];
      idx -= m.size();
    }
    return t.base[idx];
  };
  auto coord_val = [&](const ParamTree& t, std::size_t idx) {
    return coord_ref(const_cast<ParamTree&>(t), idx);
  };

  ParamTree probe = params;
  const bool relu = spec_.activation == Activation::Relu;
  double max_rel = 0.0;
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t idx = coords[i];
    const double orig = coord_val(params, idx);

    std::vector<std::uint8_t> pat_plus, pat_minus;
    coord_ref(probe, idx) = orig + h;
    const double lp = forward_impl(probe, batch, relu ? &pat_plus : nullptr);
    coord_ref(probe, idx) = orig - h;
    const double lm = forward_impl(probe, batch, relu ? &pat_minus : nullptr);
    coord_ref(probe, idx) = orig;

    if (relu && pat_plus != pat_minus) continue;  // kink crossed; one-sided derivative

    const double fd = (lp - lm) / (2.0 * h);
    const double an = coord_val(grads, idx);
    const double rel = std::fabs(fd - an) / std::max(std::fabs(an), 1e-8);
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace normforge
