#pragma once

#include <cmath>

#include "s3d/tensor.hpp"

namespace s3d {

template <typename Scalar>
Tensor5<Scalar> relu(const Tensor5<Scalar>& x) {
    Tensor5<Scalar> out(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) out[i] = x[i] > Scalar(0) ? x[i] : Scalar(0);
    return out;
}

/// Masks the incoming gradient by the sign of the forward input.
template <typename Scalar>
Tensor5<Scalar> relu_backward(const Tensor5<Scalar>& x, const Tensor5<Scalar>& grad_out) {
    detail::require_same_shape(x.shape(), grad_out.shape(), "relu_backward");
    Tensor5<Scalar> out(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i)
        out[i] = x[i] > Scalar(0) ? grad_out[i] : Scalar(0);
    return out;
}

template <typename Scalar>
Tensor5<Scalar> sigmoid(const Tensor5<Scalar>& x) {
    Tensor5<Scalar> out(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i)
        out[i] = Scalar(1) / (Scalar(1) + std::exp(-x[i]));
    return out;
}

/// Takes the forward *output* y = sigmoid(x); grad = grad_out * y * (1 - y).
template <typename Scalar>
Tensor5<Scalar> sigmoid_backward(const Tensor5<Scalar>& y, const Tensor5<Scalar>& grad_out) {
    detail::require_same_shape(y.shape(), grad_out.shape(), "sigmoid_backward");
    Tensor5<Scalar> out(y.shape());
    for (std::int64_t i = 0; i < y.size(); ++i)
        out[i] = grad_out[i] * y[i] * (Scalar(1) - y[i]);
    return out;
}

} // namespace s3d
