// Finite-difference checks for every layer primitive (the independent oracle
// for all backward implementations) plus shape-preservation properties.

#include <doctest.h>

#include "test_helpers.hpp"
#include "xcm/layers.hpp"

using namespace xcm;
using test::check_layer;
using test::random_tensor;

TEST_CASE("conv2d gradients match central finite differences") {
    Rng rng(101);
    for (int trial = 0; trial < 5; ++trial) {
        const int C = 1 + rng.uniform_int(2);
        const int T = 4 + rng.uniform_int(5);
        const int D = 1 + rng.uniform_int(3);
        const int K = 1 + rng.uniform_int(T);
        Conv conv(C, D, 2, K, 1, 1 + rng.uniform_int(2),
                  trial % 2 == 0 ? Padding::Same : Padding::Valid);
        conv.init_params(rng);
        for (double& b : conv.bias().value.data) b = rng.uniform(-0.5, 0.5);
        const auto report = check_layer(conv, random_tensor({2, C, T, D}, rng), rng);
        CAPTURE(trial);
        CHECK(report.max_rel_err < 1e-4);
    }
}

TEST_CASE("conv1d (full-width kernel) gradients match finite differences") {
    Rng rng(102);
    for (int trial = 0; trial < 5; ++trial) {
        const int T = 5 + rng.uniform_int(4);
        const int D = 2 + rng.uniform_int(2);
        const int K = 1 + rng.uniform_int(4);
        Conv conv(1, D, 3, K, D, 1, Padding::Same);
        conv.init_params(rng);
        const auto report = check_layer(conv, random_tensor({1, 1, T, D}, rng), rng);
        CHECK(report.max_rel_err < 1e-4);
    }
}

TEST_CASE("strided conv (stride 2, Same) gradients match finite differences") {
    Rng rng(103);
    Conv conv(1, 2, 2, 8, 1, 2, Padding::Same);
    conv.init_params(rng);
    const auto report = check_layer(conv, random_tensor({2, 1, 10, 2}, rng), rng);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("linear layers are exact up to float rounding") {
    Rng rng(104);
    Dense dense(6, 4);
    dense.init_params(rng);
    const auto report = check_layer(dense, random_tensor({3, 6}, rng), rng, Mode::Train, 1e-7);
    CHECK(report.max_rel_err < 1e-7);
}

TEST_CASE("batchnorm gradients (batch statistics) match finite differences") {
    Rng rng(105);
    for (int trial = 0; trial < 4; ++trial) {
        const int B = 1 + rng.uniform_int(3);
        BatchNorm bn(3);
        for (double& v : bn.params()[0]->value.data) v = rng.uniform(0.5, 1.5);
        for (double& v : bn.params()[1]->value.data) v = rng.uniform(-0.5, 0.5);
        const auto report = check_layer(bn, random_tensor({B, 3, 5, 2}, rng), rng);
        CAPTURE(B);
        CHECK(report.max_rel_err < 1e-4);
    }
}

TEST_CASE("batchnorm inference-mode gradients treat running stats as constants") {
    Rng rng(106);
    BatchNorm bn(2);
    // Push the running stats away from the init to make the check meaningful.
    Cache warm;
    Tensor warm_in = random_tensor({4, 2, 6, 2}, rng);
    bn.forward({&warm_in}, Mode::Train, nullptr, warm);
    const auto report = check_layer(bn, random_tensor({2, 2, 5, 1}, rng), rng, Mode::Inference);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("relu gradient checked away from the kink") {
    Rng rng(107);
    ReLU relu;
    Tensor in = random_tensor({2, 2, 4, 2}, rng);
    for (double& v : in.data)
        if (std::abs(v) < 0.01) v = v < 0 ? v - 0.05 : v + 0.05;
    const auto report = check_layer(relu, in, rng);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("gap1d and flatten gradients match finite differences") {
    Rng rng(108);
    Gap1d gap;
    CHECK(check_layer(gap, random_tensor({2, 3, 6, 1}, rng), rng).max_rel_err < 1e-7);
    Flatten flat;
    CHECK(check_layer(flat, random_tensor({2, 2, 3, 2}, rng), rng).max_rel_err < 1e-7);
}

TEST_CASE("concat_width gradients match finite differences on both inputs") {
    Rng rng(109);
    ConcatWidth cat;
    Tensor a = random_tensor({2, 1, 5, 3}, rng);
    Tensor b = random_tensor({2, 1, 5, 1}, rng);
    const Tensor proj = random_tensor({2, 1, 5, 4}, rng);

    auto loss = [&] {
        Cache cache;
        const Tensor out = cat.forward({&a, &b}, Mode::Train, nullptr, cache);
        double s = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) s += proj.data[i] * out.data[i];
        return s;
    };
    Cache cache;
    cat.forward({&a, &b}, Mode::Train, nullptr, cache);
    const auto grads = cat.backward(proj, cache, false);
    CHECK(check_gradient(loss, a, grads[0]).max_rel_err < 1e-7);
    CHECK(check_gradient(loss, b, grads[1]).max_rel_err < 1e-7);
}

TEST_CASE("dropout gradient uses the cached mask") {
    Rng rng(110);
    Dropout drop(0.5);
    Tensor in = random_tensor({1, 2, 4, 2}, rng);
    const Tensor proj = random_tensor({1, 2, 4, 2}, rng);

    // Freeze one mask by replaying the same rng seed inside the loss.
    auto loss = [&] {
        Rng fixed(777);
        Cache cache;
        const Tensor out = drop.forward({&in}, Mode::Train, &fixed, cache);
        double s = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) s += proj.data[i] * out.data[i];
        return s;
    };
    Rng fixed(777);
    Cache cache;
    drop.forward({&in}, Mode::Train, &fixed, cache);
    const Tensor g = drop.backward(proj, cache, false)[0];
    CHECK(check_gradient(loss, in, g).max_rel_err < 1e-7);
}

TEST_CASE("softmax + cross entropy combined backward matches finite differences") {
    Rng rng(111);
    Tensor logits = random_tensor({3, 4}, rng);
    const std::vector<int> labels = {1, 3, 0};
    auto loss = [&] { return cross_entropy_loss(softmax_rows(logits), labels, 4); };
    const Tensor analytic = softmax_xent_backward(softmax_rows(logits), labels);
    CHECK(check_gradient(loss, logits, analytic).max_rel_err < 1e-4);
}

TEST_CASE("property: Same padding with stride 1 preserves T x D for sweeping shapes") {
    Rng rng(112);
    for (int trial = 0; trial < 60; ++trial) {
        const int T = 1 + rng.uniform_int(256);
        const int D = 1 + rng.uniform_int(16);
        const int K = 1 + rng.uniform_int(T);
        Conv conv2d(1, D, 2, K, 1, 1, Padding::Same);
        Cache cache;
        const Tensor in = random_tensor({1, 1, T, D}, rng, -0.1, 0.1);
        const Tensor out = conv2d.forward({&in}, Mode::Inference, nullptr, cache);
        REQUIRE(out.dim(2) == T);
        REQUIRE(out.dim(3) == D);

        Conv conv1d(1, D, 2, K, D, 1, Padding::Same);
        Cache cache1;
        const Tensor out1 = conv1d.forward({&in}, Mode::Inference, nullptr, cache1);
        REQUIRE(out1.dim(2) == T);
        REQUIRE(out1.dim(3) == 1);
    }
}
