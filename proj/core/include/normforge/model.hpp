#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "normforge/matrix.hpp"
#include "normforge/param_tree.hpp"

namespace normforge {

enum class Activation { Tanh, Relu };
enum class LossKind { SoftmaxXent, Mse };

/// Minimal differentiable model: an MLP whose inter-layer matrices are the
/// tree's matrix slots and whose biases form the flat base slot.
struct ModelSpec {
  std::vector<int> layer_dims;  // >= 2 entries, so at least one matrix
  Activation activation = Activation::Tanh;
  LossKind loss = LossKind::Mse;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One minibatch. target_values holds real targets (mse) and
/// target_classes class indices (softmax cross-entropy); datasets fill
/// both so either loss can run.
struct Batch {
  Matrix inputs;          // examples x features
  Matrix target_values;   // examples x out_dim
  std::vector<int> target_classes;
};

class Mlp {
 public:
  explicit Mlp(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  int in_dim() const { return spec_.layer_dims.front(); }
  int out_dim() const { return spec_.layer_dims.back(); }

  /// Seeded parameter initialization (weights ~ N(0, 1/sqrt(fan_in)),
  /// biases zero).
  ParamTree init_params() const;
  ParamTree zero_params() const;

  /// Scalar loss; >= 0 for both loss kinds.
  double forward_loss(const ParamTree& params, const Batch& batch) const;

  /// (loss, analytic gradients) with gradients shaped like the parameters.
  std::pair<double, ParamTree> backward(const ParamTree& params, const Batch& batch) const;

  /// Central-difference check on a random coordinate subset (>= min_coords,
  /// capped at the parameter count). Returns the max relative error with
  /// the denominator floored at 1e-8. Relu coordinates whose perturbation
  /// crosses an activation kink are excluded.
  double finite_diff_check(const ParamTree& params, const Batch& batch, double h,
                           int min_coords = 50, std::uint64_t seed = 0) const;

 private:
  double forward_impl(const ParamTree& params, const Batch& batch,
                      std::vector<std::uint8_t>* relu_pattern) const;

  ModelSpec spec_;
};

}  // namespace normforge
