#pragma once

#include <vector>

#include "fmaml/core/tape.hpp"

namespace fmaml {

/// Mean over rows of −Σ y·log softmax(logits). `targets` must be one-hot rows.
Var cross_entropy(const Var& logits, const Tensor& targets);

/// Row-wise softmax, untaped.
Tensor softmax_rows(const Tensor& logits);

/// [B×classes] one-hot matrix for the given class indices.
Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t classes);

}  // namespace fmaml
