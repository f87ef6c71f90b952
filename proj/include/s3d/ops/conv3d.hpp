#pragma once

#include <cstdint>
#include <vector>

#include "s3d/tensor.hpp"

namespace s3d {

enum class Padding { same, valid };

/// 3D convolution kernel. `weights` axes are read as
/// (d_k, k_h, k_w, c_in, c_out); `bias` has length c_out.
template <typename Scalar>
struct Kernel3D {
    Tensor5<Scalar> weights;
    std::vector<Scalar> bias;

    Kernel3D() = default;

    Kernel3D(std::int64_t d_k, std::int64_t k_h, std::int64_t k_w,
             std::int64_t c_in, std::int64_t c_out)
        : weights(Shape5{d_k, k_h, k_w, c_in, c_out}),
          bias(static_cast<std::size_t>(c_out), Scalar(0)) {}

    Kernel3D(Tensor5<Scalar> w, std::vector<Scalar> b)
        : weights(std::move(w)), bias(std::move(b)) {
        if (static_cast<std::int64_t>(bias.size()) != c_out())
            throw ShapeError("Kernel3D: bias length does not match c_out");
    }

    std::int64_t kd() const { return weights.shape().n; }
    std::int64_t kh() const { return weights.shape().d; }
    std::int64_t kw() const { return weights.shape().h; }
    std::int64_t c_in() const { return weights.shape().w; }
    std::int64_t c_out() const { return weights.shape().c; }
};

/// Kernel with the channel roles swapped: out[a,b,c,co,ci] = in[a,b,c,ci,co].
/// Bias is reset to zeros of the new c_out. Used by the adjoint identity
/// conv3d(x, k) . y == x . deconv3d(y, transpose_channels(k)).
template <typename Scalar>
Kernel3D<Scalar> transpose_channels(const Kernel3D<Scalar>& k) {
    Kernel3D<Scalar> t(k.kd(), k.kh(), k.kw(), k.c_out(), k.c_in());
    for (std::int64_t a = 0; a < k.kd(); ++a)
        for (std::int64_t b = 0; b < k.kh(); ++b)
            for (std::int64_t c = 0; c < k.kw(); ++c)
                for (std::int64_t ci = 0; ci < k.c_in(); ++ci)
                    for (std::int64_t co = 0; co < k.c_out(); ++co)
                        t.weights.at(a, b, c, co, ci) = k.weights.at(a, b, c, ci, co);
    return t;
}

namespace detail {

struct Pad3 {
    std::int64_t d = 0, h = 0, w = 0;
};

template <typename Scalar>
Pad3 conv_padding(const Kernel3D<Scalar>& k, Padding padding) {
    if (padding == Padding::valid) return {};
    return {k.kd() / 2, k.kh() / 2, k.kw() / 2};
}

} // namespace detail

template <typename Scalar>
Shape5 conv3d_out_shape(const Shape5& x, const Kernel3D<Scalar>& k, Padding padding) {
    if (x.c != k.c_in())
        throw ShapeError("conv3d: input channels " + std::to_string(x.c) +
                         " != kernel c_in " + std::to_string(k.c_in()));
    const auto p = detail::conv_padding(k, padding);
    const std::int64_t od = x.d + 2 * p.d - k.kd() + 1;
    const std::int64_t oh = x.h + 2 * p.h - k.kh() + 1;
    const std::int64_t ow = x.w + 2 * p.w - k.kw() + 1;
    if (od < 1 || oh < 1 || ow < 1)
        throw ShapeError("conv3d: kernel larger than padded input, in " + x.to_string());
    return {x.n, od, oh, ow, k.c_out()};
}

/// Transposed convolution output shape, stride 1; the adjoint of the
/// same-padded convolution that produced `x`.
template <typename Scalar>
Shape5 deconv3d_out_shape(const Shape5& x, const Kernel3D<Scalar>& k) {
    if (x.c != k.c_in())
        throw ShapeError("deconv3d: input channels " + std::to_string(x.c) +
                         " != kernel c_in " + std::to_string(k.c_in()));
    const auto p = detail::conv_padding(k, Padding::same);
    const std::int64_t od = x.d + k.kd() - 1 - 2 * p.d;
    const std::int64_t oh = x.h + k.kh() - 1 - 2 * p.h;
    const std::int64_t ow = x.w + k.kw() - 1 - 2 * p.w;
    if (od < 1 || oh < 1 || ow < 1)
        throw ShapeError("deconv3d: degenerate output for input " + x.to_string());
    return {x.n, od, oh, ow, k.c_out()};
}

/// Reference convolution: one scalar accumulator per output element, taps
/// visited in (kd, kh, kw, ci) order, bias added last. This path is the
/// permanent oracle for the optimized path below; both visit taps in the
/// same order, so their results are bit-identical.
template <typename Scalar>
Tensor5<Scalar> conv3d_forward_naive(const Tensor5<Scalar>& x, const Kernel3D<Scalar>& k,
                                     Padding padding) {
    const Shape5 os = conv3d_out_shape(x.shape(), k, padding);
    const auto p = detail::conv_padding(k, padding);
    const Shape5& is = x.shape();
    Tensor5<Scalar> out(os);
    for (std::int64_t n = 0; n < os.n; ++n)
        for (std::int64_t od = 0; od < os.d; ++od)
            for (std::int64_t oh = 0; oh < os.h; ++oh)
                for (std::int64_t ow = 0; ow < os.w; ++ow)
                    for (std::int64_t co = 0; co < os.c; ++co) {
                        Scalar acc = Scalar(0);
                        for (std::int64_t a = 0; a < k.kd(); ++a) {
                            const std::int64_t id = od + a - p.d;
                            if (id < 0 || id >= is.d) continue;
                            for (std::int64_t b = 0; b < k.kh(); ++b) {
                                const std::int64_t ih = oh + b - p.h;
                                if (ih < 0 || ih >= is.h) continue;
                                for (std::int64_t c = 0; c < k.kw(); ++c) {
                                    const std::int64_t iw = ow + c - p.w;
                                    if (iw < 0 || iw >= is.w) continue;
                                    for (std::int64_t ci = 0; ci < is.c; ++ci)
                                        acc += k.weights.at(a, b, c, ci, co) *
                                               x.at(n, id, ih, iw, ci);
                                }
                            }
                        }
                        out.at(n, od, oh, ow, co) = acc + k.bias[static_cast<std::size_t>(co)];
                    }
    return out;
}

/// Optimized convolution: accumulates a whole (w, c_out) output row at a time
/// so the inner loop is a contiguous axpy over c_out. Tap order per output
/// element is (kd, kh, kw, ci), identical to the naive path.
template <typename Scalar>
Tensor5<Scalar> conv3d_forward(const Tensor5<Scalar>& x, const Kernel3D<Scalar>& k,
                               Padding padding) {
    const Shape5 os = conv3d_out_shape(x.shape(), k, padding);
    const auto p = detail::conv_padding(k, padding);
    const Shape5& is = x.shape();
    Tensor5<Scalar> out(os);

    const std::int64_t Ci = is.c, Co = os.c;
    const Scalar* xd = x.data();
    const Scalar* wd = k.weights.data();
    Scalar* od_ptr = out.data();
    std::vector<Scalar> acc(static_cast<std::size_t>(os.w * Co));

    for (std::int64_t n = 0; n < os.n; ++n)
        for (std::int64_t od = 0; od < os.d; ++od)
            for (std::int64_t oh = 0; oh < os.h; ++oh) {
                std::fill(acc.begin(), acc.end(), Scalar(0));
                for (std::int64_t a = 0; a < k.kd(); ++a) {
                    const std::int64_t id = od + a - p.d;
                    if (id < 0 || id >= is.d) continue;
                    for (std::int64_t b = 0; b < k.kh(); ++b) {
                        const std::int64_t ih = oh + b - p.h;
                        if (ih < 0 || ih >= is.h) continue;
                        const Scalar* xrow = xd + ((n * is.d + id) * is.h + ih) * is.w * Ci;
                        for (std::int64_t c = 0; c < k.kw(); ++c) {
                            const std::int64_t lo = std::max<std::int64_t>(0, p.w - c);
                            const std::int64_t hi = std::min(os.w, is.w - c + p.w);
                            const Scalar* wtap = wd + ((a * k.kh() + b) * k.kw() + c) * Ci * Co;
                            for (std::int64_t ci = 0; ci < Ci; ++ci) {
                                const Scalar* wrow = wtap + ci * Co;
                                for (std::int64_t ow = lo; ow < hi; ++ow) {
                                    const Scalar xv = xrow[(ow + c - p.w) * Ci + ci];
                                    Scalar* arow = acc.data() + ow * Co;
                                    for (std::int64_t co = 0; co < Co; ++co)
                                        arow[co] += xv * wrow[co];
                                }
                            }
                        }
                    }
                }
                Scalar* orow = od_ptr + ((n * os.d + od) * os.h + oh) * os.w * Co;
                for (std::int64_t ow = 0; ow < os.w; ++ow)
                    for (std::int64_t co = 0; co < Co; ++co)
                        orow[ow * Co + co] =
                            acc[static_cast<std::size_t>(ow * Co + co)] +
                            k.bias[static_cast<std::size_t>(co)];
            }
    return out;
}

template <typename Scalar>
struct ConvGrads {
    Tensor5<Scalar> grad_x;
    Tensor5<Scalar> grad_w;
    std::vector<Scalar> grad_b;
};

/// Analytic gradients of conv3d_forward with respect to input, weights, bias.
template <typename Scalar>
ConvGrads<Scalar> conv3d_backward(const Tensor5<Scalar>& x, const Kernel3D<Scalar>& k,
                                  Padding padding, const Tensor5<Scalar>& grad_out) {
    const Shape5 os = conv3d_out_shape(x.shape(), k, padding);
    detail::require_same_shape(grad_out.shape(), os, "conv3d_backward");
    const auto p = detail::conv_padding(k, padding);
    const Shape5& is = x.shape();

    ConvGrads<Scalar> g{Tensor5<Scalar>(is), Tensor5<Scalar>(k.weights.shape()),
                        std::vector<Scalar>(static_cast<std::size_t>(k.c_out()), Scalar(0))};

    const std::int64_t Ci = is.c, Co = os.c;
    const Scalar* xd = x.data();
    const Scalar* wd = k.weights.data();
    const Scalar* god = grad_out.data();
    Scalar* gxd = g.grad_x.data();
    Scalar* gwd = g.grad_w.data();

    for (std::int64_t n = 0; n < os.n; ++n)
        for (std::int64_t od = 0; od < os.d; ++od)
            for (std::int64_t oh = 0; oh < os.h; ++oh)
                for (std::int64_t ow = 0; ow < os.w; ++ow) {
                    const Scalar* go = god + (((n * os.d + od) * os.h + oh) * os.w + ow) * Co;
                    for (std::int64_t co = 0; co < Co; ++co)
                        g.grad_b[static_cast<std::size_t>(co)] += go[co];
                    for (std::int64_t a = 0; a < k.kd(); ++a) {
                        const std::int64_t id = od + a - p.d;
                        if (id < 0 || id >= is.d) continue;
                        for (std::int64_t b = 0; b < k.kh(); ++b) {
                            const std::int64_t ih = oh + b - p.h;
                            if (ih < 0 || ih >= is.h) continue;
                            for (std::int64_t c = 0; c < k.kw(); ++c) {
                                const std::int64_t iw = ow + c - p.w;
                                if (iw < 0 || iw >= is.w) continue;
                                const std::int64_t xoff =
                                    (((n * is.d + id) * is.h + ih) * is.w + iw) * Ci;
                                const std::int64_t woff = ((a * k.kh() + b) * k.kw() + c) * Ci * Co;
                                for (std::int64_t ci = 0; ci < Ci; ++ci) {
                                    const Scalar xv = xd[xoff + ci];
                                    Scalar* gwrow = gwd + woff + ci * Co;
                                    const Scalar* wrow = wd + woff + ci * Co;
                                    Scalar gx = Scalar(0);
                                    for (std::int64_t co = 0; co < Co; ++co) {
                                        gwrow[co] += xv * go[co];
                                        gx += wrow[co] * go[co];
                                    }
                                    gxd[xoff + ci] += gx;
                                }
                            }
                        }
                    }
                }
    return g;
}

/// Reference transposed convolution (stride 1, same padding), one scalar
/// accumulator per output element, taps in (kd, kh, kw, ci) order.
template <typename Scalar>
Tensor5<Scalar> deconv3d_forward_naive(const Tensor5<Scalar>& x, const Kernel3D<Scalar>& k) {
    const Shape5 os = deconv3d_out_shape(x.shape(), k);
    const auto p = detail::conv_padding(k, Padding::same);
    const Shape5& is = x.shape();
    Tensor5<Scalar> out(os);
    for (std::int64_t n = 0; n < os.n; ++n)
        for (std::int64_t od = 0; od < os.d; ++od)
            for (std::int64_t oh = 0; oh < os.h; ++oh)
                for (std::int64_t ow = 0; ow < os.w; ++ow)
                    for (std::int64_t co = 0; co < os.c; ++co) {
                        Scalar acc = Scalar(0);
                        for (std::int64_t a = 0; a < k.kd(); ++a) {
                            const std::int64_t id = od - a + p.d;
                            if (id < 0 || id >= is.d) continue;
                            for (std::int64_t b = 0; b < k.kh(); ++b) {
                                const std::int64_t ih = oh - b + p.h;
                                if (ih < 0 || ih >= is.h) continue;
                                for (std::int64_t c = 0; c < k.kw(); ++c) {
                                    const std::int64_t iw = ow - c + p.w;
                                    if (iw < 0 || iw >= is.w) continue;
                                    for (std::int64_t ci = 0; ci < is.c; ++ci)
                                        acc += k.weights.at(a, b, c, ci, co) *
                                               x.at(n, id, ih, iw, ci);
                                }
                            }
                        }
                        out.at(n, od, oh, ow, co) = acc + k.bias[static_cast<std::size_t>(co)];
                    }
    return out;
}

/// Optimized transposed convolution; row accumulator as in conv3d_forward,
/// identical tap order to the naive path.
template <typename Scalar>
Tensor5<Scalar> deconv3d_forward(const Tensor5<Scalar>& x, const Kernel3D<Scalar>& k) {
    const Shape5 os = deconv3d_out_shape(x.shape(), k);
    const auto p = detail::conv_padding(k, Padding::same);
    const Shape5& is = x.shape();
    Tensor5<Scalar> out(os);

    const std::int64_t Ci = is.c, Co = os.c;
    const Scalar* xd = x.data();
    const Scalar* wd = k.weights.data();
    Scalar* od_ptr = out.data();
    std::vector<Scalar> acc(static_cast<std::size_t>(os.w * Co));

    for (std::int64_t n = 0; n < os.n; ++n)
        for (std::int64_t od = 0; od < os.d; ++od)
            for (std::int64_t oh = 0; oh < os.h; ++oh) {
                std::fill(acc.begin(), acc.end(), Scalar(0));
                for (std::int64_t a = 0; a < k.kd(); ++a) {
                    const std::int64_t id = od - a + p.d;
                    if (id < 0 || id >= is.d) continue;
                    for (std::int64_t b = 0; b < k.kh(); ++b) {
                        const std::int64_t ih = oh - b + p.h;
                        if (ih < 0 || ih >= is.h) continue;
                        const Scalar* xrow = xd + ((n * is.d + id) * is.h + ih) * is.w * Ci;
                        for (std::int64_t c = 0; c < k.kw(); ++c) {
                            // iw = ow - c + p.w must land in [0, is.w)
                            const std::int64_t lo = std::max<std::int64_t>(0, c - p.w);
                            const std::int64_t hi = std::min(os.w, is.w + c - p.w);
                            const Scalar* wtap = wd + ((a * k.kh() + b) * k.kw() + c) * Ci * Co;
                            for (std::int64_t ci = 0; ci < Ci; ++ci) {
                                const Scalar* wrow = wtap + ci * Co;
                                for (std::int64_t ow = lo; ow < hi; ++ow) {
                                    const Scalar xv = xrow[(ow - c + p.w) * Ci + ci];
                                    Scalar* arow = acc.data() + ow * Co;
                                    for (std::int64_t co = 0; co < Co; ++co)
                                        arow[co] += xv * wrow[co];
                                }
                            }
                        }
                    }
                }
                Scalar* orow = od_ptr + ((n * os.d + od) * os.h + oh) * os.w * Co;
                for (std::int64_t ow = 0; ow < os.w; ++ow)
                    for (std::int64_t co = 0; co < Co; ++co)
                        orow[ow * Co + co] =
                            acc[static_cast<std::size_t>(ow * Co + co)] +
                            k.bias[static_cast<std::size_t>(co)];
            }
    return out;
}

/// Analytic gradients of deconv3d_forward.
template <typename Scalar>
ConvGrads<Scalar> deconv3d_backward(const Tensor5<Scalar>& x, const Kernel3D<Scalar>& k,
                                    const Tensor5<Scalar>& grad_out) {
    const Shape5 os = deconv3d_out_shape(x.shape(), k);
    detail::require_same_shape(grad_out.shape(), os, "deconv3d_backward");
    const auto p = detail::conv_padding(k, Padding::same);
    const Shape5& is = x.shape();

    ConvGrads<Scalar> g{Tensor5<Scalar>(is), Tensor5<Scalar>(k.weights.shape()),
                        std::vector<Scalar>(static_cast<std::size_t>(k.c_out()), Scalar(0))};

    const std::int64_t Ci = is.c, Co = os.c;
    const Scalar* xd = x.data();
    const Scalar* wd = k.weights.data();
    const Scalar* god = grad_out.data();
    Scalar* gxd = g.grad_x.data();
    Scalar* gwd = g.grad_w.data();

    for (std::int64_t n = 0; n < os.n; ++n)
        for (std::int64_t od = 0; od < os.d; ++od)
            for (std::int64_t oh = 0; oh < os.h; ++oh)
                for (std::int64_t ow = 0; ow < os.w; ++ow) {
                    const Scalar* go = god + (((n * os.d + od) * os.h + oh) * os.w + ow) * Co;
                    for (std::int64_t co = 0; co < Co; ++co)
                        g.grad_b[static_cast<std::size_t>(co)] += go[co];
                    for (std::int64_t a = 0; a < k.kd(); ++a) {
                        const std::int64_t id = od - a + p.d;
                        if (id < 0 || id >= is.d) continue;
                        for (std::int64_t b = 0; b < k.kh(); ++b) {
                            const std::int64_t ih = oh - b + p.h;
                            if (ih < 0 || ih >= is.h) continue;
                            for (std::int64_t c = 0; c < k.kw(); ++c) {
                                const std::int64_t iw = ow - c + p.w;
                                if (iw < 0 || iw >= is.w) continue;
                                const std::int64_t xoff =
                                    (((n * is.d + id) * is.h + ih) * is.w + iw) * Ci;
                                const std::int64_t woff = ((a * k.kh() + b) * k.kw() + c) * Ci * Co;
                                for (std::int64_t ci = 0; ci < Ci; ++ci) {
                                    const Scalar xv = xd[xoff + ci];
                                    Scalar* gwrow = gwd + woff + ci * Co;
                                    const Scalar* wrow = wd + woff + ci * Co;
                                    Scalar gx = Scalar(0);
                                    for (std::int64_t co = 0; co < Co; ++co) {
                                        gwrow[co] += xv * go[co];
                                        gx += wrow[co] * go[co];
                                    }
                                    gxd[xoff + ci] += gx;
                                }
                            }
                        }
                    }
                }
    return g;
}

} // namespace s3d
