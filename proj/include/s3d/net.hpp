#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "s3d/ops/activations.hpp"
#include "s3d/ops/batchnorm.hpp"
#include "s3d/ops/conv3d.hpp"
#include "s3d/ops/pool3d.hpp"
#include "s3d/tensor.hpp"

namespace s3d {

/// Architecture description. The encoder has one block per entry of
/// block_channels: convs_per_block[i] x (conv3d -> BN -> ReLU) followed by a
/// max-pool. The pool schedule keeps the temporal depth at 3 until the last
/// two blocks, which pool 2x2x2 and collapse depth 3 -> 2 -> 1. The decoder
/// mirrors it with one group per entry of group_channels: unpool 1x2x2 then
/// deconvs_per_group[i] x (deconv3d -> BN -> ReLU). A final 3x3x3 convolution
/// plus sigmoid produces the single-channel saliency map.
struct ArchPreset {
    std::string name;
    std::vector<std::int64_t> block_channels;
    std::vector<std::int64_t> group_channels;
    std::int64_t head_channels = 1;
    std::vector<int> convs_per_block;
    std::vector<int> deconvs_per_group;

    int blocks() const { return static_cast<int>(block_channels.size()); }
    std::int64_t spatial_factor() const { return std::int64_t(1) << blocks(); }

    PoolSpec pool_spec(int block) const {
        if (block < blocks() - 2) return PoolSpec{1, 2, 2, true};
        return PoolSpec{2, 2, 2, true};
    }

    void validate() const {
        const std::size_t b = block_channels.size();
        if (b < 2) throw ShapeError("ArchPreset: need at least 2 blocks");
        if (group_channels.size() != b || convs_per_block.size() != b ||
            deconvs_per_group.size() != b)
            throw ShapeError("ArchPreset '" + name + "': per-block vectors disagree in length");
        for (std::size_t i = 0; i < b; ++i) {
            if (block_channels[i] < 1 || group_channels[i] < 1)
                throw ShapeError("ArchPreset '" + name + "': channels must be >= 1");
            if (convs_per_block[i] < 1 || deconvs_per_group[i] < 1)
                throw ShapeError("ArchPreset '" + name + "': layer counts must be >= 1");
        }
        if (head_channels != 1)
            throw ShapeError("ArchPreset '" + name + "': head emits exactly one channel");
    }
};

inline ArchPreset paper_preset() {
    return ArchPreset{"paper", {64, 128, 256, 512, 512}, {512, 256, 128, 64, 32}, 1,
                      {2, 2, 3, 3, 3}, {3, 3, 2, 2, 2}};
}

inline ArchPreset tiny_preset() {
    return ArchPreset{"tiny", {16, 32, 32, 64, 64}, {64, 32, 32, 16, 16}, 1,
                      {1, 1, 1, 1, 1}, {1, 1, 1, 1, 1}};
}

/// Three-block variant for fast end-to-end gradient checks (8x8 inputs).
inline ArchPreset micro_preset() {
    return ArchPreset{"micro", {6, 8, 10}, {10, 8, 6}, 1, {1, 1, 1}, {1, 1, 1}};
}

inline ArchPreset preset_by_name(const std::string& name) {
    if (name == "paper") return paper_preset();
    if (name == "tiny") return tiny_preset();
    throw ShapeError("unknown preset '" + name + "' (expected \"paper\" or \"tiny\")");
}

template <typename Scalar>
struct ConvLayerParams {
    Kernel3D<Scalar> kernel;
    BNState<Scalar> bn;
};

/// All learnable state: encoder conv layers, decoder deconv layers (in
/// forward order), and the head kernel (no BN on the head).
template <typename Scalar>
struct ModelParams {
    ArchPreset preset;
    std::vector<std::string> layer_names;
    std::vector<ConvLayerParams<Scalar>> layers;
    Kernel3D<Scalar> head;

    std::int64_t encoder_layer_count() const {
        std::int64_t n = 0;
        for (int c : preset.convs_per_block) n += c;
        return n;
    }
};

/// Zero-weight parameter set with the preset's layer layout (kernels 0,
/// biases 0, gamma 1, beta 0, running stats at their defaults).
template <typename Scalar>
ModelParams<Scalar> params_skeleton(const ArchPreset& preset) {
    preset.validate();
    ModelParams<Scalar> params;
    params.preset = preset;

    std::int64_t c_in = 3;
    for (int b = 0; b < preset.blocks(); ++b) {
        const std::int64_t c_out = preset.block_channels[static_cast<std::size_t>(b)];
        for (int j = 0; j < preset.convs_per_block[static_cast<std::size_t>(b)]; ++j) {
            params.layer_names.push_back("enc" + std::to_string(b + 1) + "_conv" +
                                         std::to_string(j + 1));
            params.layers.push_back({Kernel3D<Scalar>(3, 3, 3, c_in, c_out), BNState<Scalar>(c_out)});
            c_in = c_out;
        }
    }
    for (int g = 0; g < preset.blocks(); ++g) {
        const std::int64_t c_out = preset.group_channels[static_cast<std::size_t>(g)];
        for (int j = 0; j < preset.deconvs_per_group[static_cast<std::size_t>(g)]; ++j) {
            params.layer_names.push_back("dec" + std::to_string(g + 1) + "_deconv" +
                                         std::to_string(j + 1));
            params.layers.push_back({Kernel3D<Scalar>(3, 3, 3, c_in, c_out), BNState<Scalar>(c_out)});
            c_in = c_out;
        }
    }
    params.head = Kernel3D<Scalar>(3, 3, 3, c_in, preset.head_channels);
    return params;
}

/// He-normal initialization: weights ~ Normal(0, sqrt(2/fan_in)) with
/// fan_in = kd*kh*kw*c_in, biases 0, gamma 1, beta 0. Reproducible per seed.
template <typename Scalar>
ModelParams<Scalar> init_params(const ArchPreset& preset, std::uint64_t seed) {
    ModelParams<Scalar> params = params_skeleton<Scalar>(preset);
    std::mt19937_64 master(seed);
    auto he_fill = [&](Kernel3D<Scalar>& k) {
        const double stddev = std::sqrt(2.0 / (27.0 * static_cast<double>(k.c_in())));
        k.weights = rng_fill_normal<Scalar>(k.weights.shape(), 0.0, stddev, master());
    };
    for (auto& lp : params.layers) he_fill(lp.kernel);
    he_fill(params.head);
    return params;
}

template <typename Scalar>
struct LayerTrace {
    Tensor5<Scalar> x_in; // input to the conv/deconv
    BNCache<Scalar> bn;
};

/// Per-stage output shapes plus (in train mode) everything backward needs.
template <typename Scalar>
struct ForwardTrace {
    Mode mode = Mode::infer;
    std::vector<std::string> stage_names;
    std::vector<Shape5> stage_shapes;
    std::vector<LayerTrace<Scalar>> layers;
    std::vector<Tensor5<std::int64_t>> pool_argmax;
    std::vector<Shape5> pool_in_shapes;
    std::vector<Shape5> unpool_in_shapes;
    Tensor5<Scalar> head_in;
    Tensor5<Scalar> output; // sigmoid output, kept for backward

    Shape5 stage_shape(const std::string& stage) const {
        for (std::size_t i = 0; i < stage_names.size(); ++i)
            if (stage_names[i] == stage) return stage_shapes[i];
        throw ShapeError("ForwardTrace: no stage named '" + stage + "'");
    }
};

template <typename Scalar>
struct ForwardResult {
    Tensor5<Scalar> saliency;
    ForwardTrace<Scalar> trace;
};

/// Full forward pass. Input is (n, 3, H, W, 3) with H, W divisible by
/// 2^blocks; output is (n, 1, H, W, 1) with every value in (0, 1). Train mode
/// records the trace for backward and updates BN running statistics; infer
/// mode is a pure function of (params, x).
template <typename Scalar>
ForwardResult<Scalar> forward(ModelParams<Scalar>& params, const Tensor5<Scalar>& x, Mode mode) {
    const ArchPreset& preset = params.preset;
    const Shape5& is = x.shape();
    if (is.d != 3)
        throw ShapeError("forward: input temporal depth must be 3, got " + std::to_string(is.d));
    if (is.c != 3)
        throw ShapeError("forward: input must have 3 channels, got " + std::to_string(is.c));
    const std::int64_t f = preset.spatial_factor();
    if (is.h % f != 0 || is.w % f != 0)
        throw ShapeError("forward: H and W must be divisible by " + std::to_string(f) +
                         ", got " + is.to_string());

    const bool train = (mode == Mode::train);
    ForwardResult<Scalar> res;
    ForwardTrace<Scalar>& tr = res.trace;
    tr.mode = mode;
    if (train) tr.layers.resize(params.layers.size());

    auto record = [&](const std::string& name, const Shape5& s) {
        tr.stage_names.push_back(name);
        tr.stage_shapes.push_back(s);
    };

    Tensor5<Scalar> cur = x;
    std::size_t li = 0;

    auto conv_bn_relu = [&](bool transposed) {
        auto& lp = params.layers[li];
        if (train) tr.layers[li].x_in = cur;
        Tensor5<Scalar> z = transposed ? deconv3d_forward(cur, lp.kernel)
                                       : conv3d_forward(cur, lp.kernel, Padding::same);
        Tensor5<Scalar> y =
            batchnorm_forward(z, lp.bn, mode, train ? &tr.layers[li].bn : nullptr);
        cur = relu(y);
        record(params.layer_names[li], cur.shape());
        ++li;
    };

    for (int b = 0; b < preset.blocks(); ++b) {
        for (int j = 0; j < preset.convs_per_block[static_cast<std::size_t>(b)]; ++j)
            conv_bn_relu(false);
        if (train) tr.pool_in_shapes.push_back(cur.shape());
        PoolOutput<Scalar> pooled = maxpool3d_forward(cur, preset.pool_spec(b));
        if (train) tr.pool_argmax.push_back(std::move(pooled.argmax));
        cur = std::move(pooled.values);
        record("enc" + std::to_string(b + 1) + "_pool", cur.shape());
    }

    for (int g = 0; g < preset.blocks(); ++g) {
        if (train) tr.unpool_in_shapes.push_back(cur.shape());
        cur = unpool3d(cur, 1, 2, 2);
        record("dec" + std::to_string(g + 1) + "_unpool", cur.shape());
        for (int j = 0; j < preset.deconvs_per_group[static_cast<std::size_t>(g)]; ++j)
            conv_bn_relu(true);
    }

    if (train) tr.head_in = cur;
    Tensor5<Scalar> z = conv3d_forward(cur, params.head, Padding::same);
    res.saliency = sigmoid(z);
    record("head", res.saliency.shape());
    if (train) tr.output = res.saliency;
    return res;
}

template <typename Scalar>
struct LayerGrads {
    Tensor5<Scalar> weights;
    std::vector<Scalar> bias;
    std::vector<Scalar> gamma;
    std::vector<Scalar> beta;
};

template <typename Scalar>
struct ParamGrads {
    std::vector<LayerGrads<Scalar>> layers;
    Tensor5<Scalar> head_weights;
    std::vector<Scalar> head_bias;
};

namespace detail {

// ReLU mask recovered from the BN cache: bn output = gamma*xhat + beta.
template <typename Scalar>
Tensor5<Scalar> relu_backward_from_bn(const LayerTrace<Scalar>& lt, const BNState<Scalar>& bn,
                                      const Tensor5<Scalar>& grad_out) {
    require_same_shape(lt.bn.xhat.shape(), grad_out.shape(), "backward: stale trace");
    const std::int64_t C = grad_out.shape().c;
    Tensor5<Scalar> g(grad_out.shape());
    for (std::int64_t i = 0; i < grad_out.size(); ++i) {
        const std::size_t c = static_cast<std::size_t>(i % C);
        const Scalar pre = bn.gamma[c] * lt.bn.xhat[i] + bn.beta[c];
        g[i] = pre > Scalar(0) ? grad_out[i] : Scalar(0);
    }
    return g;
}

} // namespace detail

/// Full backward pass from a train-mode trace; returns gradients for every
/// learnable tensor in the same layout as ModelParams.
template <typename Scalar>
ParamGrads<Scalar> backward(const ModelParams<Scalar>& params, const ForwardTrace<Scalar>& trace,
                            const Tensor5<Scalar>& grad_s) {
    if (trace.mode != Mode::train)
        throw ShapeError("backward: trace must come from a train-mode forward");
    if (trace.layers.size() != params.layers.size())
        throw ShapeError("backward: trace does not match params");
    detail::require_same_shape(grad_s.shape(), trace.output.shape(), "backward: grad_s");

    const ArchPreset& preset = params.preset;
    ParamGrads<Scalar> grads;
    grads.layers.resize(params.layers.size());

    Tensor5<Scalar> g = sigmoid_backward(trace.output, grad_s);
    {
        ConvGrads<Scalar> cg = conv3d_backward(trace.head_in, params.head, Padding::same, g);
        grads.head_weights = std::move(cg.grad_w);
        grads.head_bias = std::move(cg.grad_b);
        g = std::move(cg.grad_x);
    }

    std::int64_t li = static_cast<std::int64_t>(params.layers.size()) - 1;

    for (int grp = preset.blocks() - 1; grp >= 0; --grp) {
        for (int j = 0; j < preset.deconvs_per_group[static_cast<std::size_t>(grp)]; ++j, --li) {
            const auto& lp = params.layers[static_cast<std::size_t>(li)];
            const auto& lt = trace.layers[static_cast<std::size_t>(li)];
            g = detail::relu_backward_from_bn(lt, lp.bn, g);
            BNGrads<Scalar> bg = batchnorm_backward(lt.bn, lp.bn, g);
            ConvGrads<Scalar> cg = deconv3d_backward(lt.x_in, lp.kernel, bg.grad_x);
            grads.layers[static_cast<std::size_t>(li)] =
                LayerGrads<Scalar>{std::move(cg.grad_w), std::move(cg.grad_b),
                                   std::move(bg.grad_gamma), std::move(bg.grad_beta)};
            g = std::move(cg.grad_x);
        }
        g = unpool3d_backward(g, trace.unpool_in_shapes[static_cast<std::size_t>(grp)], 1, 2, 2);
    }

    for (int b = preset.blocks() - 1; b >= 0; --b) {
        g = maxpool3d_backward(trace.pool_argmax[static_cast<std::size_t>(b)],
                               trace.pool_in_shapes[static_cast<std::size_t>(b)], g);
        for (int j = 0; j < preset.convs_per_block[static_cast<std::size_t>(b)]; ++j, --li) {
            const auto& lp = params.layers[static_cast<std::size_t>(li)];
            const auto& lt = trace.layers[static_cast<std::size_t>(li)];
            g = detail::relu_backward_from_bn(lt, lp.bn, g);
            BNGrads<Scalar> bg = batchnorm_backward(lt.bn, lp.bn, g);
            ConvGrads<Scalar> cg =
                conv3d_backward(lt.x_in, lp.kernel, Padding::same, bg.grad_x);
            grads.layers[static_cast<std::size_t>(li)] =
                LayerGrads<Scalar>{std::move(cg.grad_w), std::move(cg.grad_b),
                                   std::move(bg.grad_gamma), std::move(bg.grad_beta)};
            g = std::move(cg.grad_x);
        }
    }
    return grads;
}

/// Mutable view into one learnable tensor.
template <typename Scalar>
struct ParamView {
    std::string name;
    Scalar* data;
    std::int64_t size;
};

/// Learnable tensors in a fixed order: per layer weight, bias, gamma, beta;
/// then head weight and bias. Running statistics are not learnable and are
/// not included.
template <typename Scalar>
std::vector<ParamView<Scalar>> flat_param_views(ModelParams<Scalar>& params) {
    std::vector<ParamView<Scalar>> v;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        auto& lp = params.layers[i];
        const std::string& ln = params.layer_names[i];
        v.push_back({ln + ".weight", lp.kernel.weights.data(), lp.kernel.weights.size()});
        v.push_back({ln + ".bias", lp.kernel.bias.data(),
                     static_cast<std::int64_t>(lp.kernel.bias.size())});
        v.push_back({ln + ".bn_gamma", lp.bn.gamma.data(),
                     static_cast<std::int64_t>(lp.bn.gamma.size())});
        v.push_back({ln + ".bn_beta", lp.bn.beta.data(),
                     static_cast<std::int64_t>(lp.bn.beta.size())});
    }
    v.push_back({"head.weight", params.head.weights.data(), params.head.weights.size()});
    v.push_back({"head.bias", params.head.bias.data(),
                 static_cast<std::int64_t>(params.head.bias.size())});
    return v;
}

/// Gradient views aligned index-for-index with flat_param_views.
template <typename Scalar>
std::vector<ParamView<Scalar>> flat_grad_views(const ModelParams<Scalar>& params,
                                               ParamGrads<Scalar>& grads) {
    std::vector<ParamView<Scalar>> v;
    for (std::size_t i = 0; i < grads.layers.size(); ++i) {
        auto& lg = grads.layers[i];
        const std::string& ln = params.layer_names[i];
        v.push_back({ln + ".weight", lg.weights.data(), lg.weights.size()});
        v.push_back({ln + ".bias", lg.bias.data(), static_cast<std::int64_t>(lg.bias.size())});
        v.push_back({ln + ".bn_gamma", lg.gamma.data(),
                     static_cast<std::int64_t>(lg.gamma.size())});
        v.push_back({ln + ".bn_beta", lg.beta.data(),
                     static_cast<std::int64_t>(lg.beta.size())});
    }
    v.push_back({"head.weight", grads.head_weights.data(), grads.head_weights.size()});
    v.push_back({"head.bias", grads.head_bias.data(),
                 static_cast<std::int64_t>(grads.head_bias.size())});
    return v;
}

} // namespace s3d
