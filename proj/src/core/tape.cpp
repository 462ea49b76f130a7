#include "fmaml/core/tape.hpp"

#include <cstring>
#include <unordered_map>
#include <unordered_set>

#include "fmaml/core/ops.hpp"

namespace fmaml {

namespace {
thread_local bool g_recording = true;
}

bool recording() { return g_recording; }

RecordingGuard::RecordingGuard(bool enabled) : previous_(g_recording) { g_recording = enabled; }
RecordingGuard::~RecordingGuard() { g_recording = previous_; }

Var::Var(Tensor value) {
    auto node = std::make_shared<detail::Node>();
    node->value = std::move(value);
    node_ = std::move(node);
}

Var Var::leaf(Tensor value, bool requires_grad) {
    auto node = std::make_shared<detail::Node>();
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    Var v;
    v.node_ = std::move(node);
    return v;
}

namespace {

// Ops that only move, copy or clamp values of their (already checked) inputs.
bool preserves_finiteness(const char* op) {
    for (const char* name : {"gather", "reshape", "transpose", "broadcast_rows", "broadcast_cols", "broadcast_all", "relu"})
        if (std::strcmp(op, name) == 0) return true;
    return false;
}

}  // namespace

Var Var::make(Tensor value, const char* op, std::vector<Var> inputs, detail::BackwardFn backward) {
    if (!preserves_finiteness(op)) check_finite(value, op);
    auto node = std::make_shared<detail::Node>();
    node->value = std::move(value);
    node->op = op;
    bool track = false;
    if (g_recording) {
        for (const auto& in : inputs) track = track || in.requires_grad();
    }
    if (track) {
        node->requires_grad = true;
        node->inputs = std::move(inputs);
        node->backward = std::move(backward);
    }
    Var v;
    v.node_ = std::move(node);
    return v;
}

namespace {

// Backpropagates `seed` from `loss` (any shape) to `wrt`.
std::vector<Var> run_backward(const Var& loss, const Var& seed, const std::vector<Var>& wrt, bool create_graph,
                              bool stop_at_wrt) {
    std::unordered_set<const detail::Node*> targets;
    for (const auto& w : wrt) {
        if (!w.requires_grad()) throw Error("gradients: requested input is not part of the graph");
        targets.insert(w.node());
    }

    // Post-order DFS over nodes that require grad. Deterministic: inputs are
    // visited in recorded order.
    std::vector<const detail::Node*> order;
    std::vector<Var> handles;
    std::unordered_set<const detail::Node*> seen;
    struct Frame {
        Var var;
        std::size_t next;
    };
    if (loss.requires_grad()) {
        std::vector<Frame> stack{{loss, 0}};
        seen.insert(loss.node());
        while (!stack.empty()) {
            auto& top = stack.back();
            const auto& inputs = top.var.node()->inputs;
            const bool expand = !(stop_at_wrt && targets.contains(top.var.node()));
            if (expand && top.next < inputs.size()) {
                const Var child = inputs[top.next++];
                if (child.requires_grad() && seen.insert(child.node()).second) stack.push_back({child, 0});
            } else {
                order.push_back(top.var.node());
                handles.push_back(top.var);
                stack.pop_back();
            }
        }
    }

    RecordingGuard guard(create_graph);
    std::unordered_map<const detail::Node*, Var> grads;
    if (loss.requires_grad()) grads.emplace(loss.node(), seed);

    for (std::size_t k = order.size(); k-- > 0;) {
        const auto* node = order[k];
        const bool target = targets.contains(node);
        if (!node->backward || (stop_at_wrt && target)) continue;
        auto it = grads.find(node);
        if (it == grads.end()) continue;
        const Var g = it->second;
        if (!target) grads.erase(it);
        std::vector<Var> in_grads = node->backward(handles[k], g);
        for (std::size_t i = 0; i < node->inputs.size(); ++i) {
            const Var& in = node->inputs[i];
            if (!in.requires_grad() || !in_grads[i].defined()) continue;
            auto [slot, inserted] = grads.try_emplace(in.node(), in_grads[i]);
            if (!inserted) slot->second = ops::add(slot->second, in_grads[i]);
        }
    }

    std::vector<Var> out;
    out.reserve(wrt.size());
    for (const auto& w : wrt) {
        auto it = grads.find(w.node());
        if (it != grads.end()) {
            out.push_back(it->second);
        } else {
            out.emplace_back(Tensor(w.shape(), 0.0));
        }
    }
    return out;
}

}  // namespace

std::vector<Var> gradients(const Var& loss, const std::vector<Var>& wrt, bool create_graph) {
    if (!loss.defined() || loss.value().size() != 1) throw ShapeError("gradients: loss must be a scalar");
    return run_backward(loss, Var(Tensor(loss.shape(), 1.0)), wrt, create_graph, false);
}

std::vector<Var> reference_vjp(const std::function<Var(const std::vector<Var>&)>& reference,
                               const std::vector<Var>& inputs, const Var& grad) {
    std::vector<Var> ins, wrt;
    for (const auto& in : inputs) {
        ins.push_back(in.requires_grad() ? in : Var(in.value()));
        if (in.requires_grad()) wrt.push_back(in);
    }
    const Var out = reference(ins);
    if (out.shape() != grad.shape()) throw ShapeError("reference_vjp: cotangent shape mismatch");
    auto partial = run_backward(out, grad, wrt, recording(), true);
    std::vector<Var> result(inputs.size());
    for (std::size_t i = 0, j = 0; i < inputs.size(); ++i)
        if (inputs[i].requires_grad()) result[i] = partial[j++];
    return result;
}

}  // namespace fmaml
