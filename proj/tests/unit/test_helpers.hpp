#ifndef XCM_TEST_HELPERS_HPP
#define XCM_TEST_HELPERS_HPP

#include <functional>
#include <vector>

#include "xcm/grad_check.hpp"
#include "xcm/layers.hpp"
#include "xcm/rng.hpp"
#include "xcm/tensor.hpp"

namespace xcm::test {

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Scalar harness for layer gradient checks: loss = sum(proj * forward(x)).
// The analytic input gradient comes from backward(proj); finite differences
// recompute the whole forward per coordinate.
struct LayerHarness {
    Layer& layer;
    Tensor input;
    Tensor proj;  // fixed random projection defining the scalar loss
    Mode mode = Mode::Train;

    double loss() {
        Cache cache;
        const Tensor out = layer.forward({&input}, mode, nullptr, cache);
        double s = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) s += proj.data[i] * out.data[i];
        return s;
    }

    Tensor analytic_input_grad() {
        Cache cache;
        layer.forward({&input}, mode, nullptr, cache);
        return layer.backward(proj, cache, /*accumulate_param_grads=*/false)[0];
    }

    // Analytic gradient for one parameter tensor (grads zeroed first).
    Tensor analytic_param_grad(ParamTensor& p) {
        for (ParamTensor* q : layer.params()) q->zero_grad();
        Cache cache;
        layer.forward({&input}, mode, nullptr, cache);
        layer.backward(proj, cache, /*accumulate_param_grads=*/true);
        return p.grad;
    }
};

// Checks input and all parameter gradients of a single-input layer.
inline GradCheckReport check_layer(Layer& layer, Tensor input, Rng& rng, Mode mode = Mode::Train,
                                   double tol = 1e-4) {
    Cache cache;
    Tensor probe_in = input;
    const Tensor out = layer.forward({&probe_in}, mode, nullptr, cache);
    LayerHarness h{layer, std::move(input), random_tensor(out.shape, rng), mode};

    GradCheckReport report = check_gradient([&] { return h.loss(); }, h.input,
                                            h.analytic_input_grad(), 1e-5, tol);
    for (ParamTensor* p : layer.params()) {
        const Tensor analytic = h.analytic_param_grad(*p);
        report.merge(
            check_gradient([&] { return h.loss(); }, p->value, analytic, 1e-5, tol));
    }
    return report;
}

}  // namespace xcm::test

#endif
