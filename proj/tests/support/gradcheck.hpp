#pragma once

// Central finite-difference oracle over every scalar parameter of a Gaussian scene.

#include "panosplat/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace panosplat::testing {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;   ///< parameters with |grad| above the threshold
    std::size_t total = 0;
    std::string worst;         ///< description of the worst parameter

    [[nodiscard]] bool ok(double tol) const { return max_rel_error < tol; }
};

/// `loss(scene)` must be a pure function of the scene. Relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|), evaluated where either exceeds min_grad.
template <typename Loss>
GradCheckReport check_gradients(const GaussianScene& scene, const GaussianScene& analytic,
                                 Loss&& loss, double step = 1e-4, double min_grad = 1e-6) {
    GradCheckReport rep;
    GaussianScene probe = scene;
    for (ParamGroup g : kAllParamGroups) {
        auto values = probe.group(g);
        const auto grads = analytic.group(g);
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double orig = values[k];
            values[k] = orig + step;
            const double up = loss(probe);
            values[k] = orig - step;
            const double down = loss(probe);
            values[k] = orig;
            const double numeric = (up - down) / (2.0 * step);
            const double a = grads[k];
            ++rep.total;
            const double mag = std::max(std::abs(a), std::abs(numeric));
            if (mag <= min_grad) continue;
            ++rep.checked;
            const double rel = std::abs(a - numeric) / mag;
            if (rel > rep.max_rel_error) {
                rep.max_rel_error = rel;
                std::ostringstream os;
                os << to_string(g) << "[" << k << "] analytic=" << a << " numeric=" << numeric;
                rep.worst = os.str();
            }
        }
    }
    return rep;
}

} // namespace panosplat::testing
