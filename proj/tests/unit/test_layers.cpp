#include <doctest.h>

#include <cmath>

#include "test_helpers.hpp"
#include "xcm/adam.hpp"
#include "xcm/layers.hpp"

using namespace xcm;
using test::random_tensor;

namespace {
Tensor run(Layer& layer, const Tensor& in, Mode mode = Mode::Inference, Rng* rng = nullptr) {
    Cache cache;
    return layer.forward({&in}, mode, rng, cache);
}
}  // namespace

TEST_CASE("conv2d keeps T x D under Same padding and fills the declared filter count") {
    Conv conv(1, 2, 128, 20, 1, 1, Padding::Same);
    Rng rng(1);
    conv.init_params(rng);
    const Tensor out = run(conv, random_tensor({1, 1, 100, 2}, rng));
    CHECK(out.shape == std::vector<int>{1, 128, 100, 2});
}

TEST_CASE("conv2d on all-zero input with zero bias is all zeros") {
    Conv conv(1, 2, 4, 5, 1, 1, Padding::Same);
    Rng rng(2);
    conv.init_params(rng);  // bias stays zero
    const Tensor out = run(conv, Tensor({1, 1, 9, 2}));
    for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("conv2d hand example: [1,2,3] * [1,1,1] with even total padding") {
    Conv conv(1, 1, 1, 3, 1, 1, Padding::Same);
    conv.weights().value.fill(1.0);
    conv.bias().value.fill(0.0);
    const Tensor out = run(conv, Tensor({1, 1, 3, 1}, {1, 2, 3}));
    CHECK(out.data == std::vector<double>{3, 6, 5});
}

TEST_CASE("conv2d odd total padding goes at the end of the axis") {
    // T=4, K=2, stride 1, Same: total pad 1 -> pad only after the last step.
    Conv conv(1, 1, 1, 2, 1, 1, Padding::Same);
    conv.weights().value.fill(1.0);
    const Tensor out = run(conv, Tensor({1, 1, 4, 1}, {1, 2, 3, 4}));
    CHECK(out.data == std::vector<double>{3, 5, 7, 4});
}

TEST_CASE("conv rejects oversized Valid kernels and bad filter counts") {
    CHECK_THROWS_WITH_AS(
        run(*std::make_unique<Conv>(1, 1, 1, 9, 1, 1, Padding::Valid), Tensor({1, 1, 4, 1})),
        doctest::Contains("kernel exceeds input"), std::invalid_argument);
    CHECK_THROWS_AS(Conv(1, 1, 0, 3, 1, 1, Padding::Same), std::invalid_argument);
    CHECK_THROWS_AS(Conv(1, 1, -3, 3, 1, 1, Padding::Same), std::invalid_argument);
}

TEST_CASE("conv1d spans the full input width and emits width 1") {
    Rng rng(3);
    Conv conv(1, 2, 128, 20, 2, 1, Padding::Same);
    conv.init_params(rng);
    const Tensor out = run(conv, random_tensor({1, 1, 100, 2}, rng));
    CHECK(out.shape == std::vector<int>{1, 128, 100, 1});
}

TEST_CASE("conv1d with unit kernel acts as identity / per-timestep dot product") {
    SUBCASE("identity") {
        Conv conv(1, 1, 1, 1, 1, 1, Padding::Same);
        conv.weights().value.fill(1.0);
        const Tensor in({1, 1, 5, 1}, {5, 4, 3, 2, 1});
        CHECK(run(conv, in).data == in.data);
    }
    SUBCASE("dot product over width") {
        Conv conv(1, 2, 1, 1, 2, 1, Padding::Same);
        conv.weights().value.fill(1.0);
        const Tensor in({1, 1, 4, 2}, {1, 1, 2, 2, 3, 3, 4, 4});
        CHECK(run(conv, in).data == std::vector<double>{2, 4, 6, 8});
    }
}

TEST_CASE("1x1 reduction: channel-wise pooling with 129 parameters at F=128") {
    Conv conv(128, 2, 1, 1, 1, 1, Padding::Same);
    long n = 0;
    for (ParamTensor* p : conv.params()) n += p->value.numel();
    CHECK(n == 129);

    SUBCASE("zero weights give zero output") {
        Rng rng(4);
        const Tensor out = run(conv, random_tensor({1, 128, 10, 2}, rng));
        for (double v : out.data) CHECK(v == 0.0);
    }
    SUBCASE("two constant channels combine through the weights") {
        Conv small(2, 1, 1, 1, 1, 1, Padding::Same);
        small.weights().value.data = {1.0, -1.0};
        Tensor in({1, 2, 3, 1});
        for (int t = 0; t < 3; ++t) {
            in.at(0, 0, t, 0) = 3.0;
            in.at(0, 1, t, 0) = 5.0;
        }
        const Tensor pre = run(small, in);
        for (double v : pre.data) CHECK(v == doctest::Approx(-2.0));
        ReLU relu;
        for (double v : run(relu, pre).data) CHECK(v == 0.0);
    }
}

TEST_CASE("batchnorm standardizes with batch statistics in Train mode") {
    BatchNorm bn(1);
    // channel values {1, 3}: mean 2, var 1
    const Tensor out = run(bn, Tensor({1, 1, 2, 1}, {1, 3}), Mode::Train);
    CHECK(out.data[0] == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(out.data[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("batchnorm on a constant channel yields beta") {
    BatchNorm bn(1);
    bn.params()[1]->value.fill(0.25);  // beta
    const Tensor out = run(bn, Tensor::full({2, 1, 3, 1}, 7.0), Mode::Train);
    for (double v : out.data) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("batchnorm applies gamma and beta after standardization") {
    BatchNorm bn(1);
    bn.params()[0]->value.fill(2.0);  // gamma
    bn.params()[1]->value.fill(1.0);  // beta
    // {-1, 1} is already standardized up to the epsilon correction.
    const Tensor out = run(bn, Tensor({1, 1, 2, 1}, {-1, 1}), Mode::Train);
    CHECK(out.data[0] == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(out.data[1] == doctest::Approx(3.0).epsilon(1e-4));
}

TEST_CASE("batchnorm inference before any training step uses the initial running stats") {
    BatchNorm bn(1);
    const Tensor in({1, 1, 3, 1}, {1.0, 2.0, 3.0});
    const Tensor out = run(bn, in, Mode::Inference);
    // mean 0, var 1: output == input up to the epsilon correction
    for (int i = 0; i < 3; ++i) CHECK(out.data[i] == doctest::Approx(in.data[i]).epsilon(1e-4));
}

TEST_CASE("relu clamps negatives and passes gradient only where x > 0") {
    ReLU relu;
    const Tensor in({1, 1, 3, 1}, {-1, 0, 2});
    CHECK(run(relu, in).data == std::vector<double>{0, 0, 2});

    const Tensor nonneg({1, 1, 3, 1}, {0.5, 0, 2});
    CHECK(run(relu, nonneg).data == nonneg.data);

    Cache cache;
    relu.forward({&in}, Mode::Train, nullptr, cache);
    const Tensor g = relu.backward(Tensor::full({1, 1, 3, 1}, 1.0), cache, false)[0];
    CHECK(g.data == std::vector<double>{0, 0, 1});  // subgradient at 0 is 0
}

TEST_CASE("dropout: identity cases and reproducible masks") {
    Rng rng(11);
    const Tensor in = random_tensor({1, 2, 4, 3}, rng);

    SUBCASE("rate 0 is identity in both modes") {
        Dropout d(0.0);
        Rng r1(5);
        CHECK(run(d, in, Mode::Train, &r1).data == in.data);
        CHECK(run(d, in, Mode::Inference).data == in.data);
    }
    SUBCASE("inference is identity at any rate") {
        Dropout d(0.4);
        CHECK(run(d, in, Mode::Inference).data == in.data);
    }
    SUBCASE("fixed seed reproduces the mask bit-exactly") {
        Dropout d(0.5);
        Rng r1(99), r2(99);
        CHECK(run(d, in, Mode::Train, &r1).data == run(d, in, Mode::Train, &r2).data);
    }
    SUBCASE("rate >= 1 is rejected") {
        CHECK_THROWS_AS(Dropout(1.0), std::invalid_argument);
    }
}

TEST_CASE("concat_width appends the second input as trailing columns") {
    ConcatWidth cat;
    Rng rng(6);
    const Tensor a = random_tensor({1, 1, 100, 2}, rng);
    const Tensor b = random_tensor({1, 1, 100, 1}, rng);
    Cache cache;
    const Tensor out = cat.forward({&a, &b}, Mode::Train, nullptr, cache);
    CHECK(out.shape == std::vector<int>{1, 1, 100, 3});
    for (int t = 0; t < 100; ++t) CHECK(out.at(0, 0, t, 2) == b.at(0, 0, t, 0));

    // Backward with identity upstream recovers both input shapes and values.
    auto grads = cat.backward(out, cache, false);
    CHECK(grads[0].shape == a.shape);
    CHECK(grads[1].shape == b.shape);
    CHECK(grads[0].data == a.data);
    CHECK(grads[1].data == b.data);

    const Tensor mismatched = random_tensor({1, 1, 99, 1}, rng);
    Cache c2;
    CHECK_THROWS_AS(cat.forward({&a, &mismatched}, Mode::Train, nullptr, c2),
                    std::invalid_argument);
}

TEST_CASE("gap1d averages over time and is permutation invariant") {
    Gap1d gap;
    SUBCASE("constant map") {
        CHECK(run(gap, Tensor::full({1, 3, 7, 1}, 2.5)).data ==
              std::vector<double>{2.5, 2.5, 2.5});
    }
    SUBCASE("mean of [1,2,3,4]") {
        const Tensor out = run(gap, Tensor({1, 1, 4, 1}, {1, 2, 3, 4}));
        CHECK(out.data[0] == doctest::Approx(2.5));
    }
    SUBCASE("time permutation leaves the output unchanged") {
        const Tensor out1 = run(gap, Tensor({1, 1, 4, 1}, {4, 1, 3, 2}));
        const Tensor out2 = run(gap, Tensor({1, 1, 4, 1}, {1, 2, 3, 4}));
        CHECK(out1.data[0] == doctest::Approx(out2.data[0]));
    }
    SUBCASE("width must be 1") {
        CHECK_THROWS_AS(run(gap, Tensor({1, 1, 4, 2})), std::invalid_argument);
    }
}

TEST_CASE("softmax rows: uniform on zero logits, shift invariant, 258 dense parameters") {
    const Tensor p = softmax_rows(Tensor({1, 4}));
    for (double v : p.data) CHECK(v == doctest::Approx(0.25));

    const Tensor q = softmax_rows(Tensor({1, 2}, {3.7, 3.7}));
    CHECK(q.data[0] == doctest::Approx(0.5));
    CHECK(q.data[1] == doctest::Approx(0.5));

    Dense head(128, 2);
    long n = 0;
    for (ParamTensor* p : head.params()) n += p->value.numel();
    CHECK(n == 258);

    CHECK_THROWS_AS(Dense(128, 0), std::invalid_argument);
}

TEST_CASE("softmax output is a strict probability distribution") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor p = softmax_rows(random_tensor({3, 5}, rng, -10.0, 10.0));
        for (int b = 0; b < 3; ++b) {
            double s = 0.0;
            for (int c = 0; c < 5; ++c) {
                s += p.at(b, c);
                CHECK(p.at(b, c) > 0.0);
                CHECK(p.at(b, c) < 1.0);
            }
            CHECK(std::abs(s - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("cross entropy: perfect, uniform, and hand-computed cases") {
    Tensor perfect({1, 2}, {1.0, 0.0});
    CHECK(cross_entropy_loss(perfect, {0}, 2) == doctest::Approx(0.0).epsilon(1e-9));

    Tensor uniform({1, 4}, {0.25, 0.25, 0.25, 0.25});
    CHECK(cross_entropy_loss(uniform, {2}, 4) == doctest::Approx(std::log(4.0)));

    // probs on the true classes 0.5 and 0.25 -> (ln2 + ln4)/2
    Tensor two({2, 2}, {0.5, 0.5, 0.75, 0.25});
    CHECK(cross_entropy_loss(two, {0, 1}, 2) ==
          doctest::Approx((std::log(2.0) + std::log(4.0)) / 2.0));

    CHECK_THROWS_AS(cross_entropy_loss(two, {0, 5}, 2), std::out_of_range);

    // onehot form agrees with the label form
    Tensor onehot({2, 2}, {1, 0, 0, 1});
    CHECK(cross_entropy_loss(two, onehot) == doctest::Approx(cross_entropy_loss(two, {0, 1}, 2)));
}

TEST_CASE("adam: zero-grad no-op, closed-form first step, determinism") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        ParamTensor p("w", {3});
        p.value.data = {1.0, -2.0, 0.5};
        const std::vector<double> before = p.value.data;
        adam_step({&p});
        CHECK(p.value.data == before);
        CHECK(p.adam_step == 1);
    }
    SUBCASE("first step with grad 1 moves by about -lr") {
        ParamTensor p("w", {1});
        p.value.data = {0.0};
        p.grad.data = {1.0};
        adam_step({&p});
        CHECK(p.value.data[0] == doctest::Approx(-0.001).epsilon(1e-6));
        CHECK(p.grad.data[0] == 0.0);  // gradients zeroed after the step
    }
    SUBCASE("identical gradient sequences give bit-identical parameters") {
        ParamTensor a("w", {2}), b("w", {2});
        Rng rng(3);
        for (int step = 0; step < 10; ++step) {
            const double g0 = rng.uniform(-1, 1), g1 = rng.uniform(-1, 1);
            a.grad.data = {g0, g1};
            b.grad.data = {g0, g1};
            adam_step({&a});
            adam_step({&b});
        }
        CHECK(a.value.data == b.value.data);
        CHECK(a.adam_step == 10);
    }
}

TEST_CASE("l2 regularization contributes 2*l2*w gradients and l2*sum(w^2) penalty") {
    Dense dense(2, 2, /*l2=*/0.2);
    ParamTensor& w = *dense.params()[0];
    w.value.data = {1.0, 2.0, 3.0, 4.0};
    CHECK(regularization_penalty(dense.params()) == doctest::Approx(0.2 * 30.0));
    add_regularization_gradients(dense.params());
    CHECK(w.grad.data[3] == doctest::Approx(2.0 * 0.2 * 4.0));
}
