#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fmaml/core/tape.hpp"

namespace fmaml {

/// Named, ordered tensors. Copies are independent (deep).
class ParamSet {
public:
    ParamSet() = default;

    void add(std::string name, Tensor value);

    std::size_t size() const { return entries_.size(); }
    const std::string& name(std::size_t i) const { return entries_[i].first; }
    const Tensor& operator[](std::size_t i) const { return entries_[i].second; }
    Tensor& operator[](std::size_t i) { return entries_[i].second; }

    /// Throws if `name` is absent.
    const Tensor& get(const std::string& name) const;
    Tensor& get(const std::string& name);
    std::size_t index_of(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::size_t parameter_count() const;

    /// Same names in the same order with the same shapes.
    bool congruent(const ParamSet& other) const;

    /// Leaves requiring grad, one per entry, in order.
    std::vector<Var> as_leaves() const;
    /// Constants, one per entry.
    std::vector<Var> as_constants() const;
    /// Same names as `like`, values taken from `vars`.
    static ParamSet from_vars(const ParamSet& like, const std::vector<Var>& vars);

    friend bool operator==(const ParamSet&, const ParamSet&) = default;

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
};

/// Gradient of a scalar w.r.t. a ParamSet; same keys and shapes.
using GradMap = ParamSet;

/// Returns `params - lr * grads` as a new set.
ParamSet sgd_step(const ParamSet& params, const GradMap& grads, double lr);

/// Same, but entries whose `mask` tensor is 0 are left untouched.
ParamSet sgd_step_masked(const ParamSet& params, const GradMap& grads, double lr, const ParamSet& mask);

GradMap zeros_like(const ParamSet& params);
/// a + b, entrywise.
GradMap accumulate(const GradMap& a, const GradMap& b);
GradMap scaled(const GradMap& g, double c);

/// Reverse-mode gradient of a recorded scalar w.r.t. the leaves built from `params`.
GradMap backward(const Var& loss, const ParamSet& params, const std::vector<Var>& leaves);

/// Central-difference gradient estimate (f(θ+ε) − f(θ−ε)) / 2ε per element.
GradMap finite_diff_grad(const std::function<double(const ParamSet&)>& loss_fn, const ParamSet& params,
                         double eps);

}  // namespace fmaml
