#include "fmaml/core/loss.hpp"

#include <algorithm>
#include <cmath>

#include "fmaml/core/ops.hpp"

namespace fmaml {

namespace {

void require_one_hot(const Tensor& targets) {
    const std::size_t rows = targets.dim(0), cols = targets.dim(1);
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t ones = 0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = targets.at(r, c);
            if (v == 1.0) {
                ++ones;
            } else if (v != 0.0) {
                ones = 2;
                break;
            }
        }
        if (ones != 1) throw Error("cross_entropy: label row " + std::to_string(r) + " is not one-hot");
    }
}

}  // namespace

Var cross_entropy(const Var& logits, const Tensor& targets) {
    if (logits.shape().size() != 2 || targets.shape() != logits.shape())
        throw ShapeError("cross_entropy: logits " + shape_str(logits.shape()) + " vs targets " +
                         shape_str(targets.shape()));
    const std::size_t rows = logits.shape()[0], cols = logits.shape()[1];
    if (rows == 0) throw ShapeError("cross_entropy: empty batch");
    require_one_hot(targets);

    // Shift by the (untracked) row max; log-softmax is invariant to it.
    Tensor shift({rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
        double m = logits.value().at(r, 0);
        for (std::size_t c = 1; c < cols; ++c) m = std::max(m, logits.value().at(r, c));
        for (std::size_t c = 0; c < cols; ++c) shift.at(r, c) = -m;
    }
    const Var z = ops::add(logits, Var(std::move(shift)));
    const Var lse = ops::log(ops::sum_rows(ops::exp(z)));
    const Var log_probs = ops::sub(z, ops::broadcast_rows(lse, cols));
    const Var picked = ops::sum_all(ops::mul_const(log_probs, targets));
    return ops::scale(picked, -1.0 / static_cast<double>(rows));
}

Tensor softmax_rows(const Tensor& logits) {
    const std::size_t rows = logits.dim(0), cols = logits.dim(1);
    Tensor out(logits.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        double m = logits.at(r, 0);
        for (std::size_t c = 1; c < cols; ++c) m = std::max(m, logits.at(r, c));
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) total += (out.at(r, c) = std::exp(logits.at(r, c) - m));
        for (std::size_t c = 0; c < cols; ++c) out.at(r, c) /= total;
    }
    return out;
}

Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t classes) {
    Tensor out({labels.size(), classes});
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] >= classes) throw Error("one_hot: label out of range");
        out.at(r, labels[r]) = 1.0;
    }
    return out;
}

}  // namespace fmaml
