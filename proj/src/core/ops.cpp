#include "fmaml/core/ops.hpp"

#include <cmath>
#include <map>
#include <tuple>

#include <Eigen/Core>

namespace fmaml {

SparseMap::SparseMap(std::size_t out_size, std::size_t in_size, std::vector<std::size_t> row_ptr,
                     std::vector<std::size_t> cols, std::vector<double> weights)
    : out_size_(out_size),
      in_size_(in_size),
      row_ptr_(std::move(row_ptr)),
      cols_(std::move(cols)),
      weights_(std::move(weights)) {
    if (row_ptr_.size() != out_size_ + 1 || cols_.size() != weights_.size() || row_ptr_.back() != cols_.size())
        throw ShapeError("SparseMap: inconsistent CSR arrays");
    for (auto c : cols_) {
        if (c >= in_size_) throw ShapeError("SparseMap: column out of range");
    }
}

void SparseMap::apply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t r = 0; r < out_size_; ++r) {
        double acc = 0.0;
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) acc += weights_[k] * x[cols_[k]];
        y[r] = acc;
    }
}

std::shared_ptr<const SparseMap> SparseMap::transposed() const {
    std::call_once(transpose_once_, [this] {
        std::vector<std::size_t> counts(in_size_ + 1, 0);
        for (auto c : cols_) ++counts[c + 1];
        for (std::size_t i = 0; i < in_size_; ++i) counts[i + 1] += counts[i];
        std::vector<std::size_t> cols(cols_.size());
        std::vector<double> weights(weights_.size());
        std::vector<std::size_t> fill(counts.begin(), counts.end() - 1);
        for (std::size_t r = 0; r < out_size_; ++r) {
            for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
                auto dst = fill[cols_[k]]++;
                cols[dst] = r;
                weights[dst] = weights_[k];
            }
        }
        transpose_ = std::make_shared<SparseMap>(in_size_, out_size_, std::move(counts), std::move(cols),
                                                 std::move(weights));
    });
    return transpose_;
}

namespace ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_same(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

void require_rank2(const Var& a, const char* op) {
    if (a.shape().size() != 2) throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(a.shape()));
}

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
    Tensor out = Tensor::uninitialized(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    return out;
}

template <typename F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
    Tensor out = Tensor::uninitialized(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
}

const Var& input(const Var& self, std::size_t i) { return self.node()->inputs[i]; }

}  // namespace

Var add(const Var& a, const Var& b) {
    require_same(a, b, "add");
    return Var::make(map_binary(a.value(), b.value(), [](double x, double y) { return x + y; }), "add", {a, b},
                     [](const Var&, const Var& g) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
    require_same(a, b, "sub");
    return Var::make(map_binary(a.value(), b.value(), [](double x, double y) { return x - y; }), "sub", {a, b},
                     [](const Var&, const Var& g) { return std::vector<Var>{g, scale(g, -1.0)}; });
}

Var mul(const Var& a, const Var& b) {
    require_same(a, b, "mul");
    return Var::make(map_binary(a.value(), b.value(), [](double x, double y) { return x * y; }), "mul", {a, b},
                     [](const Var& self, const Var& g) {
                         return std::vector<Var>{mul(g, input(self, 1)), mul(g, input(self, 0))};
                     });
}

Var scale(const Var& a, double c) {
    return Var::make(map_unary(a.value(), [c](double x) { return c * x; }), "scale", {a},
                     [c](const Var&, const Var& g) { return std::vector<Var>{scale(g, c)}; });
}

Var add_scalar(const Var& a, double c) {
    return Var::make(map_unary(a.value(), [c](double x) { return x + c; }), "add_scalar", {a},
                     [](const Var&, const Var& g) { return std::vector<Var>{g}; });
}

Var mul_const(const Var& a, const Tensor& c) {
    if (a.shape() != c.shape()) throw ShapeError("mul_const: shape mismatch");
    return Var::make(map_binary(a.value(), c, [](double x, double y) { return x * y; }), "mul_const", {a},
                     [c](const Var&, const Var& g) { return std::vector<Var>{mul_const(g, c)}; });
}

Var exp(const Var& a) {
    return Var::make(map_unary(a.value(), [](double x) { return std::exp(x); }), "exp", {a},
                     [](const Var& self, const Var& g) { return std::vector<Var>{mul(g, self)}; });
}

Var log(const Var& a) {
    return Var::make(map_unary(a.value(), [](double x) { return std::log(x); }), "log", {a},
                     [](const Var& self, const Var& g) {
                         return std::vector<Var>{mul(g, reciprocal(input(self, 0)))};
                     });
}

Var reciprocal(const Var& a) {
    return Var::make(map_unary(a.value(), [](double x) { return 1.0 / x; }), "reciprocal", {a},
                     [](const Var& self, const Var& g) {
                         return std::vector<Var>{scale(mul(g, mul(self, self)), -1.0)};
                     });
}

Var sqrt(const Var& a) {
    return Var::make(map_unary(a.value(), [](double x) { return std::sqrt(x); }), "sqrt", {a},
                     [](const Var& self, const Var& g) {
                         return std::vector<Var>{scale(mul(g, reciprocal(self)), 0.5)};
                     });
}

Var relu(const Var& a) {
    return Var::make(map_unary(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }), "relu", {a},
                     [](const Var& self, const Var& g) {
                         Tensor mask = map_unary(input(self, 0).value(), [](double x) { return x > 0.0 ? 1.0 : 0.0; });
                         return std::vector<Var>{mul_const(g, mask)};
                     });
}

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const auto ar = a.shape()[0], ac = a.shape()[1], br = b.shape()[0], bc = b.shape()[1];
    const auto m = trans_a ? ac : ar, k = trans_a ? ar : ac;
    const auto kb = trans_b ? bc : br, n = trans_b ? br : bc;
    if (kb != k)
        throw ShapeError("matmul: inner dimensions differ " + shape_str(a.shape()) + (trans_a ? "ᵀ" : "") + " x " +
                         shape_str(b.shape()) + (trans_b ? "ᵀ" : ""));
    Tensor out = Tensor::uninitialized({m, n});
    Eigen::Map<const RowMat> ma(a.value().data().data(), ar, ac);
    Eigen::Map<const RowMat> mb(b.value().data().data(), br, bc);
    Eigen::Map<RowMat> mo(out.data().data(), m, n);
    if (!trans_a && !trans_b) mo.noalias() = ma * mb;
    else if (!trans_a) mo.noalias() = ma * mb.transpose();
    else if (!trans_b) mo.noalias() = ma.transpose() * mb;
    else mo.noalias() = ma.transpose() * mb.transpose();
    return Var::make(std::move(out), "matmul", {a, b}, [trans_a, trans_b](const Var& self, const Var& g) {
        const Var& lhs = input(self, 0);
        const Var& rhs = input(self, 1);
        if (!trans_a && !trans_b) return std::vector<Var>{matmul(g, rhs, false, true), matmul(lhs, g, true, false)};
        if (!trans_a) return std::vector<Var>{matmul(g, rhs), matmul(g, lhs, true, false)};
        if (!trans_b) return std::vector<Var>{matmul(rhs, g, false, true), matmul(lhs, g)};
        return std::vector<Var>{matmul(rhs, g, true, true), matmul(g, lhs, true, true)};
    });
}

Var transpose(const Var& a) {
    require_rank2(a, "transpose");
    const auto m = a.shape()[0], n = a.shape()[1];
    Tensor out = Tensor::uninitialized({n, m});
    Eigen::Map<const RowMat> ma(a.value().data().data(), m, n);
    Eigen::Map<RowMat>(out.data().data(), n, m) = ma.transpose();
    return Var::make(std::move(out), "transpose", {a},
                     [](const Var&, const Var& g) { return std::vector<Var>{transpose(g)}; });
}

Var sum_rows(const Var& a) {
    require_rank2(a, "sum_rows");
    const auto m = a.shape()[0], n = a.shape()[1];
    Tensor out = Tensor::uninitialized({m, 1});
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += a.value()[i * n + j];
        out[i] = acc;
    }
    return Var::make(std::move(out), "sum_rows", {a}, [n](const Var&, const Var& g) {
        return std::vector<Var>{broadcast_rows(g, n)};
    });
}

Var sum_cols(const Var& a) {
    require_rank2(a, "sum_cols");
    const auto m = a.shape()[0], n = a.shape()[1];
    Tensor out({1, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j] += a.value()[i * n + j];
    return Var::make(std::move(out), "sum_cols", {a}, [m](const Var&, const Var& g) {
        return std::vector<Var>{broadcast_cols(g, m)};
    });
}

Var broadcast_rows(const Var& a, std::size_t n) {
    if (a.shape().size() != 2 || a.shape()[1] != 1) throw ShapeError("broadcast_rows: expected [m x 1]");
    const auto m = a.shape()[0];
    Tensor out = Tensor::uninitialized({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.value()[i];
    return Var::make(std::move(out), "broadcast_rows", {a},
                     [](const Var&, const Var& g) { return std::vector<Var>{sum_rows(g)}; });
}

Var broadcast_cols(const Var& a, std::size_t m) {
    if (a.shape().size() != 2 || a.shape()[0] != 1) throw ShapeError("broadcast_cols: expected [1 x n]");
    const auto n = a.shape()[1];
    Tensor out = Tensor::uninitialized({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.value()[j];
    return Var::make(std::move(out), "broadcast_cols", {a},
                     [](const Var&, const Var& g) { return std::vector<Var>{sum_cols(g)}; });
}

Var sum_all(const Var& a) {
    double acc = 0.0;
    for (double v : a.value().data()) acc += v;
    Shape in_shape = a.shape();
    return Var::make(Tensor::scalar(acc), "sum_all", {a}, [in_shape](const Var&, const Var& g) {
        return std::vector<Var>{broadcast_all(g, in_shape)};
    });
}

Var broadcast_all(const Var& a, const Shape& shape) {
    if (a.value().size() != 1) throw ShapeError("broadcast_all: expected a single element");
    return Var::make(Tensor(shape, a.value()[0]), "broadcast_all", {a},
                     [](const Var&, const Var& g) { return std::vector<Var>{sum_all(g)}; });
}

Var reshape(const Var& a, const Shape& shape) {
    if (shape_size(shape) != a.value().size())
        throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
    Shape in_shape = a.shape();
    return Var::make(a.value().reshaped(shape), "reshape", {a}, [in_shape](const Var&, const Var& g) {
        return std::vector<Var>{reshape(g, in_shape)};
    });
}

Var gather(const Var& a, const GatherIndex& index, const Shape& out_shape) {
    if (index->size() != shape_size(out_shape)) throw ShapeError("gather: index size does not match output shape");
    const auto& src = a.value();
    Tensor out(out_shape);
    for (std::size_t i = 0; i < index->size(); ++i) {
        auto j = (*index)[i];
        if (j >= 0) out[i] = src[static_cast<std::size_t>(j)];
    }
    Shape in_shape = a.shape();
    return Var::make(std::move(out), "gather", {a}, [index, in_shape](const Var&, const Var& g) {
        return std::vector<Var>{scatter_add(g, index, in_shape)};
    });
}

Var scatter_add(const Var& a, const GatherIndex& index, const Shape& out_shape) {
    if (index->size() != a.value().size()) throw ShapeError("scatter_add: index size does not match input");
    Tensor out(out_shape);
    const auto& src = a.value();
    for (std::size_t i = 0; i < index->size(); ++i) {
        auto j = (*index)[i];
        if (j >= 0) out[static_cast<std::size_t>(j)] += src[i];
    }
    Shape in_shape = a.shape();
    return Var::make(std::move(out), "scatter_add", {a}, [index, in_shape](const Var&, const Var& g) {
        return std::vector<Var>{gather(g, index, in_shape)};
    });
}

Var sparse_apply(const Var& a, const std::shared_ptr<const SparseMap>& map, const Shape& out_shape) {
    if (map->in_size() != a.value().size() || map->out_size() != shape_size(out_shape))
        throw ShapeError("sparse_apply: map does not fit " + shape_str(a.shape()) + " -> " + shape_str(out_shape));
    Tensor out = Tensor::uninitialized(out_shape);
    map->apply(a.value().data(), out.data());
    Shape in_shape = a.shape();
    return Var::make(std::move(out), "sparse_apply", {a}, [map, in_shape](const Var&, const Var& g) {
        return std::vector<Var>{sparse_apply(g, map->transposed(), in_shape)};
    });
}

GatherIndex im2col_index(std::size_t c, std::size_t b, std::size_t h, std::size_t w) {
    static std::mutex mu;
    static std::map<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>, GatherIndex> cache;
    std::lock_guard lock(mu);
    auto key = std::make_tuple(c, b, h, w);
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    const std::size_t n = b * h * w;
    auto idx = std::make_shared<std::vector<std::int64_t>>(c * 9 * n, -1);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx) {
                const std::size_t row = ch * 9 + ky * 3 + kx;
                for (std::size_t s = 0; s < b; ++s)
                    for (std::size_t y = 0; y < h; ++y)
                        for (std::size_t x = 0; x < w; ++x) {
                            const auto sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                            const auto sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
                            if (sy < 0 || sx < 0 || sy >= static_cast<std::ptrdiff_t>(h) ||
                                sx >= static_cast<std::ptrdiff_t>(w))
                                continue;
                            (*idx)[row * n + s * h * w + y * w + x] = static_cast<std::int64_t>(
                                ch * n + s * h * w + static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx));
                        }
            }
    cache.emplace(key, idx);
    return idx;
}

namespace {

// cols [C·9, B·H·W] from x [C, B·H·W], zero padding 1.
void im2col(const double* x, std::size_t c, std::size_t b, std::size_t h, std::size_t w, double* cols) {
    const std::size_t plane = h * w, n = b * plane;
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx) {
                double* dst = cols + (ch * 9 + ky * 3 + kx) * n;
                const double* src = x + ch * n;
                for (std::size_t s = 0; s < b; ++s)
                    for (std::size_t y = 0; y < h; ++y) {
                        double* d = dst + s * plane + y * w;
                        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
                            std::fill(d, d + w, 0.0);
                            continue;
                        }
                        const double* r = src + s * plane + static_cast<std::size_t>(sy) * w;
                        if (kx == 0) {
                            d[0] = 0.0;
                            std::copy(r, r + w - 1, d + 1);
                        } else if (kx == 1) {
                            std::copy(r, r + w, d);
                        } else {
                            std::copy(r + 1, r + w, d);
                            d[w - 1] = 0.0;
                        }
                    }
            }
}

// Adjoint of im2col: accumulates cols into dx (which must start at zero).
void col2im(const double* cols, std::size_t c, std::size_t b, std::size_t h, std::size_t w, double* dx) {
    const std::size_t plane = h * w, n = b * plane;
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx) {
                const double* src = cols + (ch * 9 + ky * 3 + kx) * n;
                double* dst = dx + ch * n;
                for (std::size_t s = 0; s < b; ++s)
                    for (std::size_t y = 0; y < h; ++y) {
                        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                        const double* g = src + s * plane + y * w;
                        double* r = dst + s * plane + static_cast<std::size_t>(sy) * w;
                        if (kx == 0) {
                            for (std::size_t i = 1; i < w; ++i) r[i - 1] += g[i];
                        } else if (kx == 1) {
                            for (std::size_t i = 0; i < w; ++i) r[i] += g[i];
                        } else {
                            for (std::size_t i = 0; i + 1 < w; ++i) r[i + 1] += g[i];
                        }
                    }
            }
}

Var conv3x3_reference(const std::vector<Var>& in, std::size_t b, std::size_t h, std::size_t w) {
    const std::size_t c = in[0].shape()[0], f = in[1].shape()[0], n = b * h * w;
    const Var cols = gather(in[0], im2col_index(c, b, h, w), {c * 9, n});
    const Var y = matmul(reshape(in[1], {f, c * 9}), cols);
    return add(y, broadcast_rows(reshape(in[2], {f, 1}), n));
}

Var batchnorm_reference(const std::vector<Var>& in, double eps) {
    const std::size_t c = in[0].shape()[0], n = in[0].shape()[1];
    const Var& x = in[0];
    const Var mean = scale(sum_rows(x), 1.0 / static_cast<double>(n));
    const Var xc = sub(x, broadcast_rows(mean, n));
    const Var var = scale(sum_rows(mul(xc, xc)), 1.0 / static_cast<double>(n));
    const Var inv = reciprocal(sqrt(add_scalar(var, eps)));
    const Var xhat = mul(xc, broadcast_rows(inv, n));
    return add(mul(xhat, broadcast_rows(reshape(in[1], {c, 1}), n)), broadcast_rows(reshape(in[2], {c, 1}), n));
}

}  // namespace

Var conv3x3(const Var& x, const Var& kernel, const Var& bias, std::size_t b, std::size_t h, std::size_t w) {
    require_rank2(x, "conv3x3");
    const std::size_t c = x.shape()[0], n = b * h * w;
    if (x.shape()[1] != n) throw ShapeError("conv3x3: input " + shape_str(x.shape()) + " does not hold B·H·W columns");
    if (kernel.shape().size() != 4 || kernel.shape()[1] != c || kernel.shape()[2] != 3 || kernel.shape()[3] != 3)
        throw ShapeError("conv3x3: kernel " + shape_str(kernel.shape()) + " does not fit " + std::to_string(c) +
                         " input channels");
    const std::size_t f = kernel.shape()[0];
    if (bias.shape() != Shape{f}) throw ShapeError("conv3x3: bias shape " + shape_str(bias.shape()));

    Tensor cols = Tensor::uninitialized({c * 9, n});
    im2col(x.value().data().data(), c, b, h, w, cols.data().data());
    Tensor out = Tensor::uninitialized({f, n});
    Eigen::Map<const RowMat> mk(kernel.value().data().data(), f, c * 9);
    Eigen::Map<const RowMat> mc(cols.data().data(), c * 9, n);
    Eigen::Map<RowMat> mo(out.data().data(), f, n);
    mo.noalias() = mk * mc;
    for (std::size_t i = 0; i < f; ++i) mo.row(i).array() += bias.value()[i];

    return Var::make(std::move(out), "conv3x3", {x, kernel, bias}, [b, h, w](const Var& self, const Var& g) {
        const auto& in = self.node()->inputs;
        if (recording())
            return reference_vjp([b, h, w](const std::vector<Var>& v) { return conv3x3_reference(v, b, h, w); },
                                 in, g);
        const Tensor& xv = in[0].value();
        const Tensor& kv = in[1].value();
        const std::size_t c = xv.dim(0), f = kv.dim(0), n = b * h * w;
        Eigen::Map<const RowMat> mg(g.value().data().data(), f, n);
        Eigen::Map<const RowMat> mk(kv.data().data(), f, c * 9);
        std::vector<Var> grads(3);
        if (in[0].requires_grad()) {
            Tensor dcols = Tensor::uninitialized({c * 9, n});
            Eigen::Map<RowMat>(dcols.data().data(), c * 9, n).noalias() = mk.transpose() * mg;
            Tensor dx(xv.shape());
            col2im(dcols.data().data(), c, b, h, w, dx.data().data());
            grads[0] = Var(std::move(dx));
        }
        if (in[1].requires_grad()) {
            Tensor cols = Tensor::uninitialized({c * 9, n});
            im2col(xv.data().data(), c, b, h, w, cols.data().data());
            Tensor dk = Tensor::uninitialized(kv.shape());
            Eigen::Map<RowMat>(dk.data().data(), f, c * 9).noalias() =
                mg * Eigen::Map<const RowMat>(cols.data().data(), c * 9, n).transpose();
            grads[1] = Var(std::move(dk));
        }
        if (in[2].requires_grad()) {
            Tensor db = Tensor::uninitialized({f});
            for (std::size_t i = 0; i < f; ++i) db[i] = mg.row(i).sum();
            grads[2] = Var(std::move(db));
        }
        return grads;
    });
}

Var batchnorm_rows(const Var& x, const Var& gamma, const Var& beta, double eps, Tensor* mean_out, Tensor* var_out) {
    require_rank2(x, "batchnorm_rows");
    const std::size_t c = x.shape()[0], n = x.shape()[1];
    if (gamma.shape() != Shape{c} || beta.shape() != Shape{c})
        throw ShapeError("batchnorm_rows: scale and shift must have " + std::to_string(c) + " entries");
    if (n == 0) throw ShapeError("batchnorm_rows: empty batch");
    const Tensor& xv = x.value();
    Tensor mean = Tensor::uninitialized({c}), inv = Tensor::uninitialized({c}), var = Tensor::uninitialized({c});
    Tensor out = Tensor::uninitialized({c, n});
    for (std::size_t i = 0; i < c; ++i) {
        const double* row = xv.data().data() + i * n;
        double m = 0.0;
        for (std::size_t j = 0; j < n; ++j) m += row[j];
        m /= static_cast<double>(n);
        double v = 0.0;
        for (std::size_t j = 0; j < n; ++j) v += (row[j] - m) * (row[j] - m);
        v /= static_cast<double>(n);
        mean[i] = m;
        var[i] = v;
        inv[i] = 1.0 / std::sqrt(v + eps);
        const double gi = gamma.value()[i], bi = beta.value()[i], s = inv[i];
        double* o = out.data().data() + i * n;
        for (std::size_t j = 0; j < n; ++j) o[j] = gi * ((row[j] - m) * s) + bi;
    }
    if (mean_out) *mean_out = mean;
    if (var_out) *var_out = var;

    return Var::make(std::move(out), "batchnorm_rows", {x, gamma, beta},
                     [eps, mean = std::move(mean), inv = std::move(inv)](const Var& self, const Var& g) {
                         const auto& in = self.node()->inputs;
                         if (recording())
                             return reference_vjp(
                                 [eps](const std::vector<Var>& v) { return batchnorm_reference(v, eps); }, in, g);
                         const Tensor& xv = in[0].value();
                         const Tensor& gv = g.value();
                         const std::size_t c = xv.dim(0), n = xv.dim(1);
                         Tensor dx = Tensor::uninitialized({c, n}), dgamma = Tensor::uninitialized({c}),
                                dbeta = Tensor::uninitialized({c});
                         for (std::size_t i = 0; i < c; ++i) {
                             const double* row = xv.data().data() + i * n;
                             const double* gr = gv.data().data() + i * n;
                             double sg = 0.0, sgx = 0.0;
                             for (std::size_t j = 0; j < n; ++j) {
                                 sg += gr[j];
                                 sgx += gr[j] * ((row[j] - mean[i]) * inv[i]);
                             }
                             dbeta[i] = sg;
                             dgamma[i] = sgx;
                             const double k = in[1].value()[i] * inv[i], mg = sg / static_cast<double>(n),
                                          mgx = sgx / static_cast<double>(n);
                             double* d = dx.data().data() + i * n;
                             for (std::size_t j = 0; j < n; ++j)
                                 d[j] = k * (gr[j] - mg - ((row[j] - mean[i]) * inv[i]) * mgx);
                         }
                         std::vector<Var> grads(3);
                         if (in[0].requires_grad()) grads[0] = Var(std::move(dx));
                         if (in[1].requires_grad()) grads[1] = Var(std::move(dgamma));
                         if (in[2].requires_grad()) grads[2] = Var(std::move(dbeta));
                         return grads;
                     });
}

}  // namespace ops
}  // namespace fmaml
