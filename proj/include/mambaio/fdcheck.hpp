#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "mambaio/graph.hpp"

namespace mambaio {

// Central-difference verification of reverse-mode gradients.
//
// `loss` evaluates the scalar objective from the current parameter values
// (forward only). The caller must have populated store gradients with one
// analytic backward pass beforehand. Returns the worst relative error
//   |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
// over every entry of every parameter.
inline double finite_diff_check(ParamStore<double>& store,
                                const std::function<double()>& loss, double eps = 1e-5) {
    if (eps <= 0) throw ContractError("finite_diff_check: eps must be positive");
    double worst = 0;
    for (auto& [name, p] : store) {
        for (int64_t i = 0; i < p.value.size(); ++i) {
            const double saved = p.value[i];
            p.value[i] = saved + eps;
            const double lp = loss();
            p.value[i] = saved - eps;
            const double lm = loss();
            p.value[i] = saved;
            if (!std::isfinite(lp) || !std::isfinite(lm))
                throw NumericError("finite_diff_check: non-finite loss at " + name);
            const double numeric = (lp - lm) / (2 * eps);
            const double analytic = p.grad[i];
            const double err = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace mambaio
