#include "fmaml/core/params.hpp"

#include <cmath>

namespace fmaml {

void ParamSet::add(std::string name, Tensor value) {
    if (contains(name)) throw Error("ParamSet: duplicate name " + name);
    entries_.emplace_back(std::move(name), std::move(value));
}

std::size_t ParamSet::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].first == name) return i;
    throw Error("ParamSet: no parameter named " + name);
}

bool ParamSet::contains(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.first == name) return true;
    return false;
}

const Tensor& ParamSet::get(const std::string& name) const { return entries_[index_of(name)].second; }
Tensor& ParamSet::get(const std::string& name) { return entries_[index_of(name)].second; }

std::size_t ParamSet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.size();
    return n;
}

bool ParamSet::congruent(const ParamSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].first != other.entries_[i].first) return false;
        if (entries_[i].second.shape() != other.entries_[i].second.shape()) return false;
    }
    return true;
}

std::vector<Var> ParamSet::as_leaves() const {
    std::vector<Var> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(Var::leaf(e.second, true));
    return out;
}

std::vector<Var> ParamSet::as_constants() const {
    std::vector<Var> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.emplace_back(e.second);
    return out;
}

ParamSet ParamSet::from_vars(const ParamSet& like, const std::vector<Var>& vars) {
    if (vars.size() != like.size()) throw ShapeError("ParamSet::from_vars: count mismatch");
    ParamSet out;
    for (std::size_t i = 0; i < vars.size(); ++i) {
        if (vars[i].shape() != like[i].shape()) throw ShapeError("ParamSet::from_vars: shape mismatch for " + like.name(i));
        out.add(like.name(i), vars[i].value());
    }
    return out;
}

namespace {

void require_congruent(const ParamSet& a, const ParamSet& b, const char* what) {
    if (!a.congruent(b)) throw ShapeError(std::string(what) + ": parameter sets are not congruent");
}

}  // namespace

ParamSet sgd_step(const ParamSet& params, const GradMap& grads, double lr) {
    require_congruent(params, grads, "sgd_step");
    ParamSet out = params;
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto dst = out[i].data();
        auto g = grads[i].data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] -= lr * g[k];
        check_finite(out[i], "sgd_step");
    }
    return out;
}

ParamSet sgd_step_masked(const ParamSet& params, const GradMap& grads, double lr, const ParamSet& mask) {
    require_congruent(params, grads, "sgd_step_masked");
    require_congruent(params, mask, "sgd_step_masked");
    ParamSet out = params;
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto dst = out[i].data();
        auto g = grads[i].data();
        auto m = mask[i].data();
        for (std::size_t k = 0; k < dst.size(); ++k)
            if (m[k] != 0.0) dst[k] -= lr * g[k];
        check_finite(out[i], "sgd_step_masked");
    }
    return out;
}

GradMap zeros_like(const ParamSet& params) {
    GradMap out;
    for (std::size_t i = 0; i < params.size(); ++i) out.add(params.name(i), Tensor(params[i].shape(), 0.0));
    return out;
}

GradMap accumulate(const GradMap& a, const GradMap& b) {
    require_congruent(a, b, "accumulate");
    GradMap out = a;
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto dst = out[i].data();
        auto src = b[i].data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    return out;
}

GradMap scaled(const GradMap& g, double c) {
    GradMap out = g;
    for (std::size_t i = 0; i < out.size(); ++i)
        for (auto& v : out[i].data()) v *= c;
    return out;
}

GradMap backward(const Var& loss, const ParamSet& params, const std::vector<Var>& leaves) {
    auto grads = gradients(loss, leaves, false);
    return ParamSet::from_vars(params, grads);
}

GradMap finite_diff_grad(const std::function<double(const ParamSet&)>& loss_fn, const ParamSet& params,
                         double eps) {
    GradMap out = zeros_like(params);
    ParamSet probe = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (std::size_t k = 0; k < params[i].size(); ++k) {
            const double orig = params[i][k];
            probe[i][k] = orig + eps;
            const double up = loss_fn(probe);
            probe[i][k] = orig - eps;
            const double down = loss_fn(probe);
            probe[i][k] = orig;
            if (!std::isfinite(up) || !std::isfinite(down))
                throw NonFiniteError("finite_diff_grad: non-finite loss at " + params.name(i));
            out[i][k] = (up - down) / (2.0 * eps);
        }
    }
    return out;
}

}  // namespace fmaml
