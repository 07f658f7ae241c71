#ifndef XCM_GRAD_CHECK_HPP
#define XCM_GRAD_CHECK_HPP

#include <functional>
#include <string>

#include "xcm/tensor.hpp"

namespace xcm {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::int64_t checked = 0;
    bool pass = true;

    void merge(const GradCheckReport& o) {
        max_rel_err = std::max(max_rel_err, o.max_rel_err);
        checked += o.checked;
        pass = pass && o.pass;
    }
};

// Central finite differences against an analytic gradient. `eval` recomputes
// the scalar loss from the current contents of `x`; every coordinate of `x`
// is perturbed by +-h in turn. Relative error uses a small floor in the
// denominator so the finite-difference noise on near-zero gradients does not
// register as failure.
GradCheckReport check_gradient(const std::function<double()>& eval, Tensor& x,
                               const Tensor& analytic, double h = 1e-5, double tolerance = 1e-4);

}  // namespace xcm

#endif
