#include "fmaml/core/meta_gradient.hpp"

#include "fmaml/core/loss.hpp"
#include "fmaml/core/ops.hpp"

namespace fmaml {

double batch_loss(const ModelConfig& cfg, const ParamSet& params, const LabeledBatch& batch) {
    RecordingGuard off(false);
    const Var logits = forward(cfg, params.as_constants(), Var(batch.inputs), BnMode::batch);
    return cross_entropy(logits, batch.targets).value().item();
}

ParamSet adapt(const ModelConfig& cfg, const ParamSet& params, const LabeledBatch& support, double lr,
               std::size_t steps, const ParamSet* update_mask) {
    ParamSet current = params;
    for (std::size_t step = 0; step < steps; ++step) {
        try {
            RecordingGuard on(true);
            const auto leaves = current.as_leaves();
            const Var loss = cross_entropy(forward(cfg, leaves, Var(support.inputs), BnMode::batch), support.targets);
            const GradMap g = backward(loss, current, leaves);
            current = update_mask ? sgd_step_masked(current, g, lr, *update_mask) : sgd_step(current, g, lr);
        } catch (const NonFiniteError& e) {
            throw NonFiniteError("adaptation step " + std::to_string(step) + ": " + e.what());
        }
    }
    return current;
}

MetaGradient meta_gradient_detailed(const ModelConfig& cfg, const ParamSet& theta, const LabeledBatch& support,
                                    const LabeledBatch& query, double alpha, std::size_t inner_steps,
                                    GradOrder order, std::size_t second_order_cap) {
    MetaGradient out;
    RecordingGuard on(true);
    if (order == GradOrder::first_order) {
        const ParamSet adapted = adapt(cfg, theta, support, alpha, inner_steps);
        const auto leaves = adapted.as_leaves();
        const Var logits = forward(cfg, leaves, Var(query.inputs), BnMode::batch, nullptr, &out.query_stats);
        const Var loss = cross_entropy(logits, query.targets);
        // θ′ and θ share names, so the gradient at θ′ is re-keyed to θ as is.
        out.grad = backward(loss, theta, leaves);
        out.query_loss = loss.value().item();
        out.query_logits = logits.value();
        return out;
    }

    if (theta.parameter_count() > second_order_cap)
        throw Error("meta_gradient: second-order mode refused for " + std::to_string(theta.parameter_count()) +
                    " parameters (cap " + std::to_string(second_order_cap) + ")");
    const auto leaves = theta.as_leaves();
    std::vector<Var> current = leaves;
    for (std::size_t step = 0; step < inner_steps; ++step) {
        const Var loss = cross_entropy(forward(cfg, current, Var(support.inputs), BnMode::batch), support.targets);
        const auto grads = gradients(loss, current, true);
        for (std::size_t i = 0; i < current.size(); ++i)
            current[i] = ops::sub(current[i], ops::scale(grads[i], alpha));
    }
    const Var logits = forward(cfg, current, Var(query.inputs), BnMode::batch, nullptr, &out.query_stats);
    const Var loss = cross_entropy(logits, query.targets);
    out.grad = backward(loss, theta, leaves);
    out.query_loss = loss.value().item();
    out.query_logits = logits.value();
    return out;
}

GradMap meta_gradient(const ModelConfig& cfg, const ParamSet& theta, const LabeledBatch& support,
                      const LabeledBatch& query, double alpha, std::size_t inner_steps, GradOrder order,
                      std::size_t second_order_cap) {
    return meta_gradient_detailed(cfg, theta, support, query, alpha, inner_steps, order, second_order_cap).grad;
}

}  // namespace fmaml
