#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "styleaug/common.hpp"

namespace styleaug {

namespace detail {

// std::vector storage that skips value-initialization on resize; fresh
// buffers on the training hot path are fully overwritten anyway.
template <class T, class A = std::allocator<T>>
struct default_init_allocator : public A {
    template <class U>
    struct rebind {
        using other =
            default_init_allocator<U,
                                   typename std::allocator_traits<A>::template rebind_alloc<U>>;
    };
    using A::A;
    template <class U>
    void construct(U* ptr) noexcept(std::is_nothrow_default_constructible_v<U>) {
        ::new (static_cast<void*>(ptr)) U;
    }
    template <class U, class... Args>
    void construct(U* ptr, Args&&... args) {
        std::allocator_traits<A>::construct(static_cast<A&>(*this), ptr,
                                            std::forward<Args>(args)...);
    }
};

}  // namespace detail

using DVec = std::vector<double, detail::default_init_allocator<double>>;

// Dense row-major double tensor. Feature maps are {C,H,W}, vectors {D},
// matrices {R,C}. Double precision throughout: the training workloads are
// desk-scale and the gradient tolerances are tight.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(numel_of(shape_), 0.0);
    }

    // Allocation without the zero-fill, for buffers that are fully
    // overwritten right away (hot paths are memory-bandwidth bound).
    static Tensor uninit(std::vector<int> shape) {
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_.resize(numel_of(t.shape_));
        return t;
    }
    Tensor(std::vector<int> shape, const std::vector<double>& data) : shape_(std::move(shape)) {
        if (data.size() != numel_of(shape_))
            throw ShapeError("tensor data size does not match shape");
        data_.assign(data.begin(), data.end());
    }

    static size_t numel_of(const std::vector<int>& shape) {
        size_t n = 1;
        for (int d : shape) {
            if (d < 0) throw ShapeError("negative dimension");
            n *= static_cast<size_t>(d);
        }
        return shape.empty() ? 0 : n;
    }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    int ndim() const { return static_cast<int>(shape_.size()); }
    size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    DVec& vec() { return data_; }
    const DVec& vec() const { return data_; }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    // {C,H,W} accessors
    double& at3(int c, int y, int x) {
        return data_[(static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    double at3(int c, int y, int x) const {
        return data_[(static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape_.size(); ++i)
            s += (i ? "," : "") + std::to_string(shape_[i]);
        return s + ")";
    }

    uint64_t checksum() const { return fnv1a64(data_.data(), data_.size() * sizeof(double)); }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor randn(std::vector<int> shape, std::mt19937_64& rng, double stddev = 1.0) {
        Tensor t(std::move(shape));
        std::normal_distribution<double> dist(0.0, stddev);
        for (auto& v : t.data_) v = dist(rng);
        return t;
    }

    static Tensor uniform(std::vector<int> shape, std::mt19937_64& rng,
                          double lo = 0.0, double hi = 1.0) {
        Tensor t(std::move(shape));
        std::uniform_real_distribution<double> dist(lo, hi);
        for (auto& v : t.data_) v = dist(rng);
        return t;
    }

private:
    std::vector<int> shape_;
    DVec data_;
};

inline bool all_finite(const Tensor& t) {
    for (size_t i = 0; i < t.numel(); ++i)
        if (!std::isfinite(t[i])) return false;
    return true;
}

}  // namespace styleaug
