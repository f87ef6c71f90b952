#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "s3d/net.hpp"

using namespace s3d;

namespace {
Tensor5f rand_input(const Shape5& s, std::uint64_t seed) {
    Tensor5f t(s);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(uni(rng));
    return t;
}
} // namespace

TEST_CASE("init_params is reproducible and zeroes biases") {
    const auto a = init_params<float>(tiny_preset(), 99);
    const auto b = init_params<float>(tiny_preset(), 99);
    REQUIRE(a.layers.size() == b.layers.size());
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        const auto& ka = a.layers[i].kernel;
        const auto& kb = b.layers[i].kernel;
        for (std::int64_t j = 0; j < ka.weights.size(); ++j)
            REQUIRE(ka.weights[j] == kb.weights[j]);
        for (float v : ka.bias) REQUIRE(v == 0.0f);
        for (float v : a.layers[i].bn.gamma) REQUIRE(v == 1.0f);
        for (float v : a.layers[i].bn.beta) REQUIRE(v == 0.0f);
    }
    const auto c = init_params<float>(tiny_preset(), 100);
    bool differs = false;
    for (std::int64_t j = 0; j < a.layers[0].kernel.weights.size() && !differs; ++j)
        differs = a.layers[0].kernel.weights[j] != c.layers[0].kernel.weights[j];
    REQUIRE(differs);
}

TEST_CASE("He initialization hits the target standard deviation") {
    // a 3x3x3x64x128 kernel has 221k samples; CLT keeps the sample std
    // within 5% of sqrt(2/(27*64))
    ArchPreset p{"t", {64, 128}, {8, 8}, 1, {1, 1}, {1, 1}};
    const auto params = init_params<float>(p, 7);
    const auto& w = params.layers[1].kernel.weights;
    REQUIRE(w.shape() == Shape5{3, 3, 3, 64, 128});
    double mu = 0.0;
    for (std::int64_t i = 0; i < w.size(); ++i) mu += w[i];
    mu /= static_cast<double>(w.size());
    double var = 0.0;
    for (std::int64_t i = 0; i < w.size(); ++i) var += (w[i] - mu) * (w[i] - mu);
    var /= static_cast<double>(w.size());
    const double target = std::sqrt(2.0 / (27.0 * 64.0));
    REQUIRE(std::abs(std::sqrt(var) - target) < 0.05 * target);
}

TEST_CASE("tiny preset maps (2,3,64,64,3) to (2,1,64,64,1) in (0,1)") {
    auto params = init_params<float>(tiny_preset(), 1);
    const auto x = rand_input({2, 3, 64, 64, 3}, 2);
    auto res = forward(params, x, Mode::infer);
    REQUIRE(res.saliency.shape() == Shape5{2, 1, 64, 64, 1});
    for (std::int64_t i = 0; i < res.saliency.size(); ++i) {
        REQUIRE(res.saliency[i] > 0.0f);
        REQUIRE(res.saliency[i] < 1.0f);
    }
}

TEST_CASE("tiny preset shape trace: pools, unpools, temporal collapse") {
    auto params = init_params<float>(tiny_preset(), 3);
    const auto x = rand_input({1, 3, 64, 64, 3}, 4);
    auto res = forward(params, x, Mode::infer);
    const auto& tr = res.trace;

    REQUIRE(tr.stage_shape("enc1_pool") == Shape5{1, 3, 32, 32, 16});
    REQUIRE(tr.stage_shape("enc2_pool") == Shape5{1, 3, 16, 16, 32});
    REQUIRE(tr.stage_shape("enc3_pool") == Shape5{1, 3, 8, 8, 32});
    REQUIRE(tr.stage_shape("enc4_pool") == Shape5{1, 2, 4, 4, 64});
    REQUIRE(tr.stage_shape("enc5_pool") == Shape5{1, 1, 2, 2, 64});

    REQUIRE(tr.stage_shape("dec1_deconv1") == Shape5{1, 1, 4, 4, 64});
    REQUIRE(tr.stage_shape("dec2_deconv1") == Shape5{1, 1, 8, 8, 32});
    REQUIRE(tr.stage_shape("dec3_deconv1") == Shape5{1, 1, 16, 16, 32});
    REQUIRE(tr.stage_shape("dec4_deconv1") == Shape5{1, 1, 32, 32, 16});
    REQUIRE(tr.stage_shape("dec5_deconv1") == Shape5{1, 1, 64, 64, 16});
    REQUIRE(tr.stage_shape("head") == Shape5{1, 1, 64, 64, 1});

    // every decoder stage runs at temporal depth 1
    for (std::size_t i = 0; i < tr.stage_names.size(); ++i)
        if (tr.stage_names[i].rfind("dec", 0) == 0) REQUIRE(tr.stage_shapes[i].d == 1);
}

TEST_CASE("forward rejects bad input geometry") {
    auto params = init_params<float>(tiny_preset(), 5);
    REQUIRE_THROWS_AS(forward(params, rand_input({1, 2, 64, 64, 3}, 1), Mode::infer), ShapeError);
    REQUIRE_THROWS_AS(forward(params, rand_input({1, 3, 48, 64, 3}, 1), Mode::infer), ShapeError);
    REQUIRE_THROWS_AS(forward(params, rand_input({1, 3, 64, 64, 1}, 1), Mode::infer), ShapeError);
}

TEST_CASE("infer mode is pure; train mode changes only BN running stats") {
    auto params = init_params<float>(micro_preset(), 6);
    const auto x = rand_input({1, 3, 8, 8, 3}, 7);

    auto r1 = forward(params, x, Mode::infer);
    auto r2 = forward(params, x, Mode::infer);
    for (std::int64_t i = 0; i < r1.saliency.size(); ++i)
        REQUIRE(r1.saliency[i] == r2.saliency[i]);

    const auto before = params;
    auto rt = forward(params, x, Mode::train);
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        const auto& pa = params.layers[li];
        const auto& pb = before.layers[li];
        for (std::int64_t i = 0; i < pa.kernel.weights.size(); ++i)
            REQUIRE(pa.kernel.weights[i] == pb.kernel.weights[i]);
        REQUIRE(pa.bn.gamma == pb.bn.gamma);
        REQUIRE(pa.bn.beta == pb.bn.beta);
        REQUIRE(pa.bn.running_mean != pb.bn.running_mean); // batch stats folded in
    }
}

TEST_CASE("backward: zero grad_s gives zero parameter gradients") {
    auto params = init_params<float>(micro_preset(), 8);
    const auto x = rand_input({1, 3, 8, 8, 3}, 9);
    auto res = forward(params, x, Mode::train);
    auto grads = backward(params, res.trace, zeros<float>(res.saliency.shape()));
    auto views = flat_grad_views(params, grads);
    for (const auto& v : views)
        for (std::int64_t i = 0; i < v.size; ++i) REQUIRE(v.data[i] == 0.0f);
}

TEST_CASE("backward is deterministic") {
    auto params = init_params<float>(micro_preset(), 10);
    const auto x = rand_input({1, 3, 8, 8, 3}, 11);
    auto res = forward(params, x, Mode::train);
    Tensor5f gs(res.saliency.shape());
    std::mt19937_64 rng(12);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (std::int64_t i = 0; i < gs.size(); ++i) gs[i] = static_cast<float>(dist(rng));

    auto g1 = backward(params, res.trace, gs);
    auto g2 = backward(params, res.trace, gs);
    auto v1 = flat_grad_views(params, g1);
    auto v2 = flat_grad_views(params, g2);
    for (std::size_t i = 0; i < v1.size(); ++i)
        for (std::int64_t j = 0; j < v1[i].size; ++j) REQUIRE(v1[i].data[j] == v2[i].data[j]);
}

TEST_CASE("backward rejects infer traces and mismatched grad shapes") {
    auto params = init_params<float>(micro_preset(), 13);
    const auto x = rand_input({1, 3, 8, 8, 3}, 14);
    auto infer_res = forward(params, x, Mode::infer);
    REQUIRE_THROWS_AS(backward(params, infer_res.trace, zeros<float>({1, 1, 8, 8, 1})),
                      ShapeError);
    auto train_res = forward(params, x, Mode::train);
    REQUIRE_THROWS_AS(backward(params, train_res.trace, zeros<float>({1, 1, 4, 4, 1})),
                      ShapeError);
}
