#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "fmaml/core/tensor.hpp"

namespace fmaml {

class Var;

namespace detail {

struct Node;
using BackwardFn = std::function<std::vector<Var>(const Var& self, const Var& grad)>;

struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<Var> inputs;
    BackwardFn backward;
    const char* op = "leaf";
};

}  // namespace detail

/// Handle to an immutable node of the gradient tape.
///
/// Nodes are created by the op functions in ops.hpp. An op records its inputs
/// and a backward rule only while recording is enabled on the current thread
/// and at least one input requires a gradient; otherwise it yields a constant.
/// Backward rules are written in terms of the same ops, so differentiating a
/// gradient (second order) works whenever the first backward pass itself was
/// recorded.
class Var {
public:
    Var() = default;

    /// Constant node.
    explicit Var(Tensor value);
    /// Leaf node; gradients can be requested w.r.t. it when `requires_grad`.
    static Var leaf(Tensor value, bool requires_grad);

    const Tensor& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool defined() const { return static_cast<bool>(node_); }
    const detail::Node* node() const { return node_.get(); }

    /// Builds a node from an op. Called by op implementations only.
    static Var make(Tensor value, const char* op, std::vector<Var> inputs, detail::BackwardFn backward);

private:
    std::shared_ptr<const detail::Node> node_;
};

/// True when ops on this thread record backward rules.
bool recording();

/// RAII switch for tape recording on the current thread.
class RecordingGuard {
public:
    explicit RecordingGuard(bool enabled);
    ~RecordingGuard();
    RecordingGuard(const RecordingGuard&) = delete;
    RecordingGuard& operator=(const RecordingGuard&) = delete;

private:
    bool previous_;
};

/// Reverse-mode gradients of scalar `loss` w.r.t. each of `wrt`.
///
/// Inputs unreachable from `loss` get zero gradients. With `create_graph` the
/// backward pass is itself recorded, so the returned gradients can be
/// differentiated again.
std::vector<Var> gradients(const Var& loss, const std::vector<Var>& wrt, bool create_graph = false);

/// Recorded vector-Jacobian product of `reference(inputs)` with cotangent
/// `grad`, holding the inputs independent (the graph is not followed past
/// them). Inputs that do not require a gradient get an undefined entry.
/// Fused ops use this as their backward rule while recording.
std::vector<Var> reference_vjp(const std::function<Var(const std::vector<Var>&)>& reference,
                               const std::vector<Var>& inputs, const Var& grad);

}  // namespace fmaml
