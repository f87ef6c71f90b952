#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "s3d/tensor.hpp"

namespace s3d {

enum class Mode { train, infer };

/// Per-channel batch normalization state: learned scale/shift plus running
/// statistics for inference.
template <typename Scalar>
struct BNState {
    std::vector<Scalar> gamma;
    std::vector<Scalar> beta;
    std::vector<Scalar> running_mean;
    std::vector<Scalar> running_var;
    Scalar momentum = Scalar(0.9);
    Scalar epsilon = Scalar(1e-5);

    BNState() = default;
    explicit BNState(std::int64_t channels)
        : gamma(static_cast<std::size_t>(channels), Scalar(1)),
          beta(static_cast<std::size_t>(channels), Scalar(0)),
          running_mean(static_cast<std::size_t>(channels), Scalar(0)),
          running_var(static_cast<std::size_t>(channels), Scalar(1)) {}

    std::int64_t channels() const { return static_cast<std::int64_t>(gamma.size()); }
};

/// What backward needs from a train-mode forward.
template <typename Scalar>
struct BNCache {
    Tensor5<Scalar> xhat;
    std::vector<Scalar> inv_std;
};

namespace detail {
template <typename Scalar>
void require_bn_channels(const Shape5& s, const BNState<Scalar>& state) {
    if (s.c != state.channels())
        throw ShapeError("batchnorm: tensor channels " + std::to_string(s.c) +
                         " != state channels " + std::to_string(state.channels()));
}
} // namespace detail

/// Train mode normalizes per channel over (n,d,h,w) with population variance
/// and updates running stats as running <- momentum*running + (1-momentum)*batch.
/// Infer mode uses the running stats only. `cache` may be null outside training.
template <typename Scalar>
Tensor5<Scalar> batchnorm_forward(const Tensor5<Scalar>& x, BNState<Scalar>& state, Mode mode,
                                  BNCache<Scalar>* cache = nullptr) {
    detail::require_bn_channels(x.shape(), state);
    const Shape5& s = x.shape();
    const std::int64_t C = s.c;
    const std::int64_t per_channel = s.n * s.d * s.h * s.w;
    Tensor5<Scalar> out(s);

    std::vector<Scalar> mu(static_cast<std::size_t>(C), Scalar(0));
    std::vector<Scalar> inv(static_cast<std::size_t>(C), Scalar(0));

    if (mode == Mode::train) {
        std::vector<Scalar> var(static_cast<std::size_t>(C), Scalar(0));
        for (std::int64_t i = 0; i < x.size(); ++i)
            mu[static_cast<std::size_t>(i % C)] += x[i];
        for (std::int64_t c = 0; c < C; ++c)
            mu[static_cast<std::size_t>(c)] /= static_cast<Scalar>(per_channel);
        for (std::int64_t i = 0; i < x.size(); ++i) {
            const Scalar d = x[i] - mu[static_cast<std::size_t>(i % C)];
            var[static_cast<std::size_t>(i % C)] += d * d;
        }
        for (std::int64_t c = 0; c < C; ++c) {
            var[static_cast<std::size_t>(c)] /= static_cast<Scalar>(per_channel);
            inv[static_cast<std::size_t>(c)] =
                Scalar(1) / std::sqrt(var[static_cast<std::size_t>(c)] + state.epsilon);
            state.running_mean[static_cast<std::size_t>(c)] =
                state.momentum * state.running_mean[static_cast<std::size_t>(c)] +
                (Scalar(1) - state.momentum) * mu[static_cast<std::size_t>(c)];
            state.running_var[static_cast<std::size_t>(c)] =
                state.momentum * state.running_var[static_cast<std::size_t>(c)] +
                (Scalar(1) - state.momentum) * var[static_cast<std::size_t>(c)];
        }
    } else {
        for (std::int64_t c = 0; c < C; ++c) {
            mu[static_cast<std::size_t>(c)] = state.running_mean[static_cast<std::size_t>(c)];
            inv[static_cast<std::size_t>(c)] =
                Scalar(1) / std::sqrt(state.running_var[static_cast<std::size_t>(c)] + state.epsilon);
        }
    }

    Tensor5<Scalar> xhat(s);
    for (std::int64_t i = 0; i < x.size(); ++i) {
        const std::size_t c = static_cast<std::size_t>(i % C);
        const Scalar xh = (x[i] - mu[c]) * inv[c];
        xhat[i] = xh;
        out[i] = state.gamma[c] * xh + state.beta[c];
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv);
    }
    return out;
}

template <typename Scalar>
struct BNGrads {
    Tensor5<Scalar> grad_x;
    std::vector<Scalar> grad_gamma;
    std::vector<Scalar> grad_beta;
};

/// Backward through a train-mode forward; accounts for the dependence of the
/// batch statistics on x.
template <typename Scalar>
BNGrads<Scalar> batchnorm_backward(const BNCache<Scalar>& cache, const BNState<Scalar>& state,
                                   const Tensor5<Scalar>& grad_out) {
    const Shape5& s = cache.xhat.shape();
    detail::require_same_shape(grad_out.shape(), s, "batchnorm_backward");
    const std::int64_t C = s.c;
    const Scalar per_channel = static_cast<Scalar>(s.n * s.d * s.h * s.w);

    BNGrads<Scalar> g{Tensor5<Scalar>(s),
                      std::vector<Scalar>(static_cast<std::size_t>(C), Scalar(0)),
                      std::vector<Scalar>(static_cast<std::size_t>(C), Scalar(0))};

    for (std::int64_t i = 0; i < grad_out.size(); ++i) {
        const std::size_t c = static_cast<std::size_t>(i % C);
        g.grad_beta[c] += grad_out[i];
        g.grad_gamma[c] += grad_out[i] * cache.xhat[i];
    }
    for (std::int64_t i = 0; i < grad_out.size(); ++i) {
        const std::size_t c = static_cast<std::size_t>(i % C);
        g.grad_x[i] = state.gamma[c] * cache.inv_std[c] *
                      (grad_out[i] - g.grad_beta[c] / per_channel -
                       cache.xhat[i] * g.grad_gamma[c] / per_channel);
    }
    return g;
}

} // namespace s3d
