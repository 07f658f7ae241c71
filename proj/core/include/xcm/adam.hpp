#ifndef XCM_ADAM_HPP
#define XCM_ADAM_HPP

#include <vector>

#include "xcm/layers.hpp"

namespace xcm {

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam update applied in place; gradients are zeroed after the
// step. The per-tensor step counter increases by exactly 1 per call.
void adam_step(const std::vector<ParamTensor*>& params, const AdamConfig& cfg = {});

// Adds d(l2 * sum(w^2))/dw = 2*l2*w into the gradients of every parameter
// tensor carrying an l2 coefficient. Call between backward and adam_step.
void add_regularization_gradients(const std::vector<ParamTensor*>& params);

// The l2 * sum(w^2) penalty currently contributed by the parameters.
double regularization_penalty(const std::vector<ParamTensor*>& params);

}  // namespace xcm

#endif
