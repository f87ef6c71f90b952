#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "s3d/error.hpp"

namespace s3d {

/// Extents of a rank-5 tensor, axis order (batch, depth, height, width, channels).
/// All five extents are >= 1.
struct Shape5 {
    std::int64_t n = 1;
    std::int64_t d = 1;
    std::int64_t h = 1;
    std::int64_t w = 1;
    std::int64_t c = 1;

    bool operator==(const Shape5&) const = default;

    /// Total element count; throws ShapeError on non-positive extents and
    /// std::length_error when the product overflows addressable size.
    std::int64_t elems() const {
        const std::int64_t ext[5] = {n, d, h, w, c};
        std::int64_t total = 1;
        for (std::int64_t e : ext) {
            if (e < 1) throw ShapeError("Shape5: extents must be >= 1, got " + to_string());
            if (total > std::numeric_limits<std::int64_t>::max() / e)
                throw std::length_error("Shape5: element count overflows: " + to_string());
            total *= e;
        }
        return total;
    }

    /// Row-major flat offset of (in, id, ih, iw, ic).
    std::int64_t offset(std::int64_t in, std::int64_t id, std::int64_t ih,
                        std::int64_t iw, std::int64_t ic) const {
        return (((in * d + id) * h + ih) * w + iw) * c + ic;
    }

    /// Inverse of offset(); offset -> (n,d,h,w,c).
    std::array<std::int64_t, 5> unravel(std::int64_t off) const {
        std::array<std::int64_t, 5> idx{};
        idx[4] = off % c; off /= c;
        idx[3] = off % w; off /= w;
        idx[2] = off % h; off /= h;
        idx[1] = off % d; off /= d;
        idx[0] = off;
        return idx;
    }

    std::string to_string() const {
        return "(" + std::to_string(n) + "," + std::to_string(d) + "," + std::to_string(h) +
               "," + std::to_string(w) + "," + std::to_string(c) + ")";
    }
};

/// Dense rank-5 tensor with contiguous row-major storage, axis order
/// (n, d, h, w, c). Elementwise binary ops require identical shapes; there is
/// no broadcasting. Scalar is float for training/inference and double for
/// gradient checking.
template <typename Scalar>
class Tensor5 {
public:
    Tensor5() = default;

    explicit Tensor5(const Shape5& shape, Scalar fill = Scalar(0))
        : shape_(shape), data_(static_cast<std::size_t>(shape.elems()), fill) {}

    Tensor5(const Shape5& shape, std::vector<Scalar> values)
        : shape_(shape), data_(std::move(values)) {
        if (static_cast<std::int64_t>(data_.size()) != shape_.elems())
            throw ShapeError("Tensor5: buffer length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_.to_string());
    }

    const Shape5& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }

    Scalar& operator[](std::int64_t off) { return data_[static_cast<std::size_t>(off)]; }
    Scalar operator[](std::int64_t off) const { return data_[static_cast<std::size_t>(off)]; }

    Scalar& at(std::int64_t n, std::int64_t d, std::int64_t h, std::int64_t w, std::int64_t c) {
        return data_[static_cast<std::size_t>(shape_.offset(n, d, h, w, c))];
    }
    Scalar at(std::int64_t n, std::int64_t d, std::int64_t h, std::int64_t w, std::int64_t c) const {
        return data_[static_cast<std::size_t>(shape_.offset(n, d, h, w, c))];
    }

private:
    Shape5 shape_{};
    std::vector<Scalar> data_;
};

using Tensor5f = Tensor5<float>;
using Tensor5d = Tensor5<double>;

template <typename Scalar>
Tensor5<Scalar> zeros(const Shape5& shape) {
    return Tensor5<Scalar>(shape, Scalar(0));
}

template <typename Scalar>
Tensor5<Scalar> full(const Shape5& shape, Scalar value) {
    return Tensor5<Scalar>(shape, value);
}

namespace detail {
inline void require_same_shape(const Shape5& a, const Shape5& b, const char* op) {
    if (!(a == b))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.to_string() +
                         " vs " + b.to_string());
}
} // namespace detail

template <typename Scalar, typename F>
Tensor5<Scalar> map_unary(const Tensor5<Scalar>& t, F&& f) {
    Tensor5<Scalar> out(t.shape());
    const std::int64_t size = t.size();
    for (std::int64_t i = 0; i < size; ++i) out[i] = f(t[i]);
    return out;
}

template <typename Scalar>
Tensor5<Scalar> add(const Tensor5<Scalar>& a, const Tensor5<Scalar>& b) {
    detail::require_same_shape(a.shape(), b.shape(), "add");
    Tensor5<Scalar> out(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

template <typename Scalar>
Tensor5<Scalar> sub(const Tensor5<Scalar>& a, const Tensor5<Scalar>& b) {
    detail::require_same_shape(a.shape(), b.shape(), "sub");
    Tensor5<Scalar> out(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

template <typename Scalar>
Tensor5<Scalar> mul_elementwise(const Tensor5<Scalar>& a, const Tensor5<Scalar>& b) {
    detail::require_same_shape(a.shape(), b.shape(), "mul_elementwise");
    Tensor5<Scalar> out(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

template <typename Scalar>
Tensor5<Scalar> scale(const Tensor5<Scalar>& t, Scalar alpha) {
    Tensor5<Scalar> out(t.shape());
    for (std::int64_t i = 0; i < t.size(); ++i) out[i] = t[i] * alpha;
    return out;
}

/// Reduction in flat index order; two calls on the same tensor are bit-identical.
template <typename Scalar>
Scalar sum(const Tensor5<Scalar>& t) {
    Scalar acc = Scalar(0);
    for (std::int64_t i = 0; i < t.size(); ++i) acc += t[i];
    return acc;
}

template <typename Scalar>
Scalar mean(const Tensor5<Scalar>& t) {
    return sum(t) / static_cast<Scalar>(t.size());
}

/// Fills a fresh tensor with Normal(mean, std) draws. Same
/// (shape, mean, std, seed) always produces the same tensor.
template <typename Scalar>
Tensor5<Scalar> rng_fill_normal(const Shape5& shape, double mean, double std, std::uint64_t seed) {
    if (std < 0) throw ShapeError("rng_fill_normal: std must be >= 0");
    Tensor5<Scalar> out(shape);
    if (std == 0.0) {
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = static_cast<Scalar>(mean);
        return out;
    }
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist(mean, std);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = static_cast<Scalar>(dist(gen));
    return out;
}

} // namespace s3d
