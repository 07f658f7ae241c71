#include "xcm/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace xcm {

GradCheckReport check_gradient(const std::function<double()>& eval, Tensor& x,
                               const Tensor& analytic, double h, double tolerance) {
    if (!x.same_shape(analytic))
        throw std::invalid_argument("check_gradient: analytic gradient shape mismatch");
    GradCheckReport report;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double orig = x.data[i];
        x.data[i] = orig + h;
        const double up = eval();
        x.data[i] = orig - h;
        const double down = eval();
        x.data[i] = orig;
        const double fd = (up - down) / (2.0 * h);
        const double a = analytic.data[i];
        const double scale = std::max({std::abs(a), std::abs(fd), 1e-4});
        const double rel = std::abs(a - fd) / scale;
        report.max_rel_err = std::max(report.max_rel_err, rel);
        ++report.checked;
    }
    report.pass = report.max_rel_err < tolerance;
    return report;
}

}  // namespace xcm
