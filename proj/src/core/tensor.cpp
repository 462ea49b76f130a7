#include "fmaml/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Core>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace fmaml {

#if defined(__GLIBC__)
namespace {
// Serve large activation buffers from the heap rather than fresh mmap pages.
const bool heap_tuned = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
}();
}  // namespace
#endif

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    if (shape_size(shape_) != data_.size())
        throw ShapeError("tensor shape " + shape_str(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
}

Tensor Tensor::uninitialized(Shape shape) {
    Tensor t;
    t.data_.resize(shape_size(shape));
    t.shape_ = std::move(shape);
    return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

std::size_t Tensor::dim(std::size_t i) const {
    if (i >= shape_.size()) throw ShapeError("dimension index out of range");
    return shape_[i];
}

double Tensor::item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size())
        throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

bool Tensor::all_finite() const {
    // x·0 is 0 for finite x and NaN otherwise.
    const double* p = data_.data();
    const std::size_t n = data_.size();
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        a0 += p[i] * 0.0;
        a1 += p[i + 1] * 0.0;
        a2 += p[i + 2] * 0.0;
        a3 += p[i + 3] * 0.0;
    }
    for (; i < n; ++i) a0 += p[i] * 0.0;
    return a0 + a1 + a2 + a3 == 0.0;
}

void check_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) throw NonFiniteError(std::string("non-finite value produced by ") + what);
}

double max_rel_error(const Tensor& a, const Tensor& b, double floor) {
    if (a.shape() != b.shape()) throw ShapeError("max_rel_error: shape mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace fmaml
