#include "xcm/adam.hpp"

#include <cmath>

namespace xcm {

void adam_step(const std::vector<ParamTensor*>& params, const AdamConfig& cfg) {
    for (ParamTensor* p : params) {
        p->adam_step += 1;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p->adam_step));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p->adam_step));
        for (std::size_t i = 0; i < p->value.data.size(); ++i) {
            const double g = p->grad.data[i];
            double& m = p->adam_m.data[i];
            double& v = p->adam_v.data[i];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            p->value.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        p->zero_grad();
    }
}

void add_regularization_gradients(const std::vector<ParamTensor*>& params) {
    for (ParamTensor* p : params) {
        if (p->l2 == 0.0) continue;
        for (std::size_t i = 0; i < p->value.data.size(); ++i)
            p->grad.data[i] += 2.0 * p->l2 * p->value.data[i];
    }
}

double regularization_penalty(const std::vector<ParamTensor*>& params) {
    double penalty = 0.0;
    for (const ParamTensor* p : params) {
        if (p->l2 == 0.0) continue;
        double sq = 0.0;
        for (double w : p->value.data) sq += w * w;
        penalty += p->l2 * sq;
    }
    return penalty;
}

}  // namespace xcm
