#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fastturn/nn/params.hpp"

namespace fastturn::nn {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    bool pass = false;
    std::vector<GradCheckEntry> per_param;
};

// Compares the reverse-mode gradient of loss_fn against central differences
// (f(x+h) - f(x-h)) / 2h for every trainable scalar. loss_fn must be pure;
// two evaluations at the start guard against hidden state. Relative error is
// |g - fd| / max(1, |g|, |fd|).
GradCheckReport grad_check(const std::function<double(const ParameterSet&)>& loss_fn,
                           const std::function<GradMap(const ParameterSet&)>& grad_fn,
                           const ParameterSet& params, double h, double tol);

} // namespace fastturn::nn
