#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "s3d/net.hpp"
#include "s3d/tensor.hpp"

namespace s3d {

template <typename Scalar>
struct LossValue {
    Scalar loss = Scalar(0);
    Tensor5<Scalar> grad_s;
};

/// Mini-batch squared error between saliency batch s and ground truth g,
/// both (k, 1, h, w, 1):
///   loss = (1/k)(1/h)(1/w) sum (s - g)^2,  grad_s = 2 (s - g) / (k h w).
template <typename Scalar>
LossValue<Scalar> mse_loss(const Tensor5<Scalar>& s, const Tensor5<Scalar>& g) {
    detail::require_same_shape(s.shape(), g.shape(), "mse_loss");
    const Shape5& sh = s.shape();
    if (sh.d != 1 || sh.c != 1)
        throw ShapeError("mse_loss: expected (k,1,h,w,1) maps, got " + sh.to_string());
    const Scalar norm = Scalar(1) / static_cast<Scalar>(sh.n * sh.h * sh.w);

    LossValue<Scalar> out;
    out.grad_s = Tensor5<Scalar>(sh);
    double acc = 0.0;
    for (std::int64_t i = 0; i < s.size(); ++i) {
        const Scalar d = s[i] - g[i];
        acc += static_cast<double>(d) * static_cast<double>(d);
        out.grad_s[i] = Scalar(2) * d * norm;
    }
    out.loss = static_cast<Scalar>(acc) * norm;
    return out;
}

/// Adam optimizer state: first/second moments per learnable tensor slot
/// (aligned with flat_param_views order), step counter, hyperparameters.
template <typename Scalar>
struct AdamState {
    struct Moments {
        std::vector<Scalar> m;
        std::vector<Scalar> v;
    };
    std::vector<Moments> slots;
    std::int64_t t = 0;
    Scalar alpha = Scalar(1e-4);
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar epsilon = Scalar(1e-8);
};

template <typename Scalar>
AdamState<Scalar> make_adam_state(const std::vector<ParamView<Scalar>>& params,
                                  Scalar alpha = Scalar(1e-4), Scalar beta1 = Scalar(0.9),
                                  Scalar beta2 = Scalar(0.999), Scalar epsilon = Scalar(1e-8)) {
    AdamState<Scalar> st;
    st.alpha = alpha;
    st.beta1 = beta1;
    st.beta2 = beta2;
    st.epsilon = epsilon;
    st.slots.reserve(params.size());
    for (const auto& p : params)
        st.slots.push_back({std::vector<Scalar>(static_cast<std::size_t>(p.size), Scalar(0)),
                            std::vector<Scalar>(static_cast<std::size_t>(p.size), Scalar(0))});
    return st;
}

/// One Adam update over aligned parameter/gradient views:
///   t += 1
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   mhat = m / (1 - b1^t); vhat = v / (1 - b2^t)
///   theta <- theta - alpha * mhat / (sqrt(vhat) + eps)
template <typename Scalar>
void adam_step_views(std::vector<ParamView<Scalar>>& params,
                     const std::vector<ParamView<Scalar>>& grads, AdamState<Scalar>& state) {
    if (params.size() != grads.size() || params.size() != state.slots.size())
        throw ShapeError("adam_step: misaligned params/grads/state");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1), state.t);
    const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2), state.t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].size != grads[i].size ||
            params[i].size != static_cast<std::int64_t>(state.slots[i].m.size()))
            throw ShapeError("adam_step: slot " + params[i].name + " misaligned");
        Scalar* th = params[i].data;
        const Scalar* g = grads[i].data;
        auto& m = state.slots[i].m;
        auto& v = state.slots[i].v;
        for (std::int64_t j = 0; j < params[i].size; ++j) {
            const std::size_t sj = static_cast<std::size_t>(j);
            m[sj] = state.beta1 * m[sj] + (Scalar(1) - state.beta1) * g[j];
            v[sj] = state.beta2 * v[sj] + (Scalar(1) - state.beta2) * g[j] * g[j];
            const Scalar mhat = static_cast<Scalar>(m[sj] / bc1);
            const Scalar vhat = static_cast<Scalar>(v[sj] / bc2);
            th[j] -= state.alpha * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

/// Adam step over a whole model.
template <typename Scalar>
void adam_step(ModelParams<Scalar>& params, ParamGrads<Scalar>& grads, AdamState<Scalar>& state) {
    auto pv = flat_param_views(params);
    auto gv = flat_grad_views(params, grads);
    adam_step_views(pv, gv, state);
}

} // namespace s3d
