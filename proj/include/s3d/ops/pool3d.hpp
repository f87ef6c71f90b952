#pragma once

#include <cstdint>

#include "s3d/tensor.hpp"

namespace s3d {

/// Max-pooling geometry. Window extents equal the strides; ceil_mode pads
/// overhanging windows by truncating them at the border.
struct PoolSpec {
    std::int64_t sd = 1;
    std::int64_t sh = 1;
    std::int64_t sw = 1;
    bool ceil_mode = true;
};

/// Pool values plus, per output element, the flat offset of the selected
/// input maximum. Ties go to the smallest flat offset.
template <typename Scalar>
struct PoolOutput {
    Tensor5<Scalar> values;
    Tensor5<std::int64_t> argmax;
};

namespace detail {

inline std::int64_t pool_extent(std::int64_t extent, std::int64_t stride, bool ceil_mode,
                                const char* axis) {
    if (stride < 1) throw ShapeError("maxpool3d: stride must be >= 1");
    const std::int64_t out = ceil_mode ? (extent + stride - 1) / stride : extent / stride;
    if (out < 1)
        throw ShapeError(std::string("maxpool3d: stride exceeds ") + axis +
                         " extent with ceil_mode off");
    return out;
}

} // namespace detail

template <typename Scalar>
PoolOutput<Scalar> maxpool3d_forward(const Tensor5<Scalar>& x, const PoolSpec& spec) {
    const Shape5& is = x.shape();
    const Shape5 os{is.n,
                    detail::pool_extent(is.d, spec.sd, spec.ceil_mode, "depth"),
                    detail::pool_extent(is.h, spec.sh, spec.ceil_mode, "height"),
                    detail::pool_extent(is.w, spec.sw, spec.ceil_mode, "width"),
                    is.c};
    PoolOutput<Scalar> out{Tensor5<Scalar>(os), Tensor5<std::int64_t>(os)};

    for (std::int64_t n = 0; n < os.n; ++n)
        for (std::int64_t od = 0; od < os.d; ++od) {
            const std::int64_t d0 = od * spec.sd;
            const std::int64_t d1 = std::min(d0 + spec.sd, is.d);
            for (std::int64_t oh = 0; oh < os.h; ++oh) {
                const std::int64_t h0 = oh * spec.sh;
                const std::int64_t h1 = std::min(h0 + spec.sh, is.h);
                for (std::int64_t ow = 0; ow < os.w; ++ow) {
                    const std::int64_t w0 = ow * spec.sw;
                    const std::int64_t w1 = std::min(w0 + spec.sw, is.w);
                    for (std::int64_t c = 0; c < is.c; ++c) {
                        std::int64_t best_off = is.offset(n, d0, h0, w0, c);
                        Scalar best = x[best_off];
                        for (std::int64_t d = d0; d < d1; ++d)
                            for (std::int64_t h = h0; h < h1; ++h)
                                for (std::int64_t w = w0; w < w1; ++w) {
                                    const std::int64_t off = is.offset(n, d, h, w, c);
                                    if (x[off] > best) {
                                        best = x[off];
                                        best_off = off;
                                    }
                                }
                        const std::int64_t oo = os.offset(n, od, oh, ow, c);
                        out.values[oo] = best;
                        out.argmax[oo] = best_off;
                    }
                }
            }
        }
    return out;
}

/// Scatters each output gradient to the single input position that won the
/// max; sum(grad_x) == sum(grad_out).
template <typename Scalar>
Tensor5<Scalar> maxpool3d_backward(const Tensor5<std::int64_t>& argmax, const Shape5& input_shape,
                                   const Tensor5<Scalar>& grad_out) {
    detail::require_same_shape(argmax.shape(), grad_out.shape(), "maxpool3d_backward");
    Tensor5<Scalar> grad_x(input_shape);
    for (std::int64_t i = 0; i < grad_out.size(); ++i)
        grad_x[argmax[i]] += grad_out[i];
    return grad_x;
}

/// Bed-of-nails upsampling: each input value lands at the minimal corner of
/// its (fd, fh, fw) cell, the rest of the cell is zero.
template <typename Scalar>
Tensor5<Scalar> unpool3d(const Tensor5<Scalar>& x, std::int64_t fd, std::int64_t fh,
                         std::int64_t fw) {
    if (fd < 1 || fh < 1 || fw < 1) throw ShapeError("unpool3d: factors must be >= 1");
    const Shape5& is = x.shape();
    const Shape5 os{is.n, is.d * fd, is.h * fh, is.w * fw, is.c};
    Tensor5<Scalar> out(os);
    for (std::int64_t n = 0; n < is.n; ++n)
        for (std::int64_t d = 0; d < is.d; ++d)
            for (std::int64_t h = 0; h < is.h; ++h)
                for (std::int64_t w = 0; w < is.w; ++w)
                    for (std::int64_t c = 0; c < is.c; ++c)
                        out.at(n, d * fd, h * fh, w * fw, c) = x.at(n, d, h, w, c);
    return out;
}

/// Gathers gradients back from the cell corners.
template <typename Scalar>
Tensor5<Scalar> unpool3d_backward(const Tensor5<Scalar>& grad_out, const Shape5& input_shape,
                                  std::int64_t fd, std::int64_t fh, std::int64_t fw) {
    const Shape5 expect{input_shape.n, input_shape.d * fd, input_shape.h * fh,
                        input_shape.w * fw, input_shape.c};
    detail::require_same_shape(grad_out.shape(), expect, "unpool3d_backward");
    Tensor5<Scalar> grad_x(input_shape);
    for (std::int64_t n = 0; n < input_shape.n; ++n)
        for (std::int64_t d = 0; d < input_shape.d; ++d)
            for (std::int64_t h = 0; h < input_shape.h; ++h)
                for (std::int64_t w = 0; w < input_shape.w; ++w)
                    for (std::int64_t c = 0; c < input_shape.c; ++c)
                        grad_x.at(n, d, h, w, c) = grad_out.at(n, d * fd, h * fh, w * fw, c);
    return grad_x;
}

} // namespace s3d
