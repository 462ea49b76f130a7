#pragma once

#include <cstddef>
#include <memory>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fmaml {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// A NaN or infinity was produced; the message names the op that produced it.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

using Shape = std::vector<std::size_t>;

namespace detail {
/// Allocator whose value-initialization leaves doubles uninitialized.
template <class T>
struct DefaultInitAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    DefaultInitAllocator() = default;
    template <class U>
    DefaultInitAllocator(const DefaultInitAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{alignment}));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{alignment}); }

    template <class U>
    void construct(U* p) noexcept {
        ::new (static_cast<void*>(p)) U;
    }
    template <class U, class... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }

    template <class U>
    bool operator==(const DefaultInitAllocator<U>&) const noexcept {
        return true;
    }
};
}  // namespace detail

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles. Plain value type: copies are deep.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value);
    /// Tensor whose elements are unspecified until written.
    static Tensor uninitialized(Shape shape);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const;
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }
    std::vector<double> to_vector() const { return {data_.begin(), data_.end()}; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    /// Element (r, c) of a rank-2 tensor.
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }

    /// Value of a single-element tensor.
    double item() const;

    /// Same data under a new shape of equal element count.
    Tensor reshaped(Shape shape) const;

    bool all_finite() const;

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    Shape shape_;
    std::vector<double, detail::DefaultInitAllocator<double>> data_;
};

/// Throws NonFiniteError naming `what` if any element is NaN or infinite.
void check_finite(const Tensor& t, const char* what);

/// Max over elements of |a - b| / max(|a|, |b|, floor).
double max_rel_error(const Tensor& a, const Tensor& b, double floor = 1e-12);

}  // namespace fmaml
