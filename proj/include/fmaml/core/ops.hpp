#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

#include "fmaml/core/tape.hpp"

namespace fmaml {

/// Fixed sparse linear map y = A x in CSR form (rows index outputs).
class SparseMap {
public:
    SparseMap(std::size_t out_size, std::size_t in_size, std::vector<std::size_t> row_ptr,
              std::vector<std::size_t> cols, std::vector<double> weights);

    std::size_t out_size() const { return out_size_; }
    std::size_t in_size() const { return in_size_; }

    void apply(std::span<const double> x, std::span<double> y) const;
    /// Aᵀ, built on first use.
    std::shared_ptr<const SparseMap> transposed() const;

private:
    std::size_t out_size_;
    std::size_t in_size_;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> cols_;
    std::vector<double> weights_;
    mutable std::once_flag transpose_once_;
    mutable std::shared_ptr<const SparseMap> transpose_;
};

/// out[i] = in[index[i]], or 0 where index[i] < 0.
using GatherIndex = std::shared_ptr<const std::vector<std::int64_t>>;

namespace ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
/// a ∘ c for a constant tensor c.
Var mul_const(const Var& a, const Tensor& c);

Var exp(const Var& a);
Var log(const Var& a);
Var reciprocal(const Var& a);
Var sqrt(const Var& a);
Var relu(const Var& a);

/// Rank-2 matrix product op(a)·op(b); op transposes when its flag is set.
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);
Var transpose(const Var& a);

/// [m×n] -> [m×1]
Var sum_rows(const Var& a);
/// [m×n] -> [1×n]
Var sum_cols(const Var& a);
/// [m×1] -> [m×n]
Var broadcast_rows(const Var& a, std::size_t n);
/// [1×n] -> [m×n]
Var broadcast_cols(const Var& a, std::size_t m);
/// any -> [1]
Var sum_all(const Var& a);
/// [1] -> shape
Var broadcast_all(const Var& a, const Shape& shape);

Var reshape(const Var& a, const Shape& shape);

Var gather(const Var& a, const GatherIndex& index, const Shape& out_shape);
/// Adjoint of gather: accumulates a into a zero tensor of `out_shape`.
Var scatter_add(const Var& a, const GatherIndex& index, const Shape& out_shape);

/// y = A·vec(a), reshaped to `out_shape`.
/// Gather index mapping [C, B·H·W] to im2col columns [C·9, B·H·W] for a 3×3
/// kernel with zero padding 1. Cached per shape.
GatherIndex im2col_index(std::size_t channels, std::size_t batch, std::size_t height, std::size_t width);

/// 3×3 convolution with zero padding 1 on channel-major activations:
/// x [C, B·H·W], kernel [F, C, 3, 3], bias [F] -> [F, B·H·W].
Var conv3x3(const Var& x, const Var& kernel, const Var& bias, std::size_t batch, std::size_t height,
            std::size_t width);

/// Normalizes each row of x [C, N] with its own mean and biased variance,
/// then applies gamma [C] and beta [C]. Optionally reports the statistics.
Var batchnorm_rows(const Var& x, const Var& gamma, const Var& beta, double eps, Tensor* mean = nullptr,
                   Tensor* var = nullptr);

Var sparse_apply(const Var& a, const std::shared_ptr<const SparseMap>& map, const Shape& out_shape);

}  // namespace ops
}  // namespace fmaml
