#pragma once

#include "fmaml/core/model.hpp"

namespace fmaml {

/// Model inputs [B×1×H×W] with one-hot targets [B×outputs].
struct LabeledBatch {
    Tensor inputs;
    Tensor targets;

    std::size_t size() const { return inputs.empty() ? 0 : inputs.dim(0); }
};

enum class GradOrder { first_order, second_order };

/// Parameter count above which second-order meta-gradients are refused.
inline constexpr std::size_t kDefaultSecondOrderCap = 20000;

/// Cross-entropy of the model on `batch`, batch-statistics batchnorm, untaped.
double batch_loss(const ModelConfig& cfg, const ParamSet& params, const LabeledBatch& batch);

/// `steps` full-batch gradient steps on the support loss at rate `lr`.
/// Entries whose `frozen_mask` value is 0 are not updated (mask may be null).
/// Throws NonFiniteError naming the failing step.
ParamSet adapt(const ModelConfig& cfg, const ParamSet& params, const LabeledBatch& support, double lr,
               std::size_t steps, const ParamSet* update_mask = nullptr);

struct MetaGradient {
    GradMap grad;
    double query_loss = 0.0;
    Tensor query_logits;
    BatchStats query_stats;
};

/// Gradient w.r.t. θ of the query loss after adapting θ on the support set.
///
/// first_order: gradient at θ′ w.r.t. θ′, reported under θ's names.
/// second_order: total derivative through the recorded inner updates.
MetaGradient meta_gradient_detailed(const ModelConfig& cfg, const ParamSet& theta, const LabeledBatch& support,
                                    const LabeledBatch& query, double alpha, std::size_t inner_steps,
                                    GradOrder order, std::size_t second_order_cap = kDefaultSecondOrderCap);

GradMap meta_gradient(const ModelConfig& cfg, const ParamSet& theta, const LabeledBatch& support,
                      const LabeledBatch& query, double alpha, std::size_t inner_steps, GradOrder order,
                      std::size_t second_order_cap = kDefaultSecondOrderCap);

}  // namespace fmaml
