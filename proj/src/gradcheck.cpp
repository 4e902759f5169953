#include "fastturn/nn/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace fastturn::nn {

GradCheckReport grad_check(const std::function<double(const ParameterSet&)>& loss_fn,
                           const std::function<GradMap(const ParameterSet&)>& grad_fn,
                           const ParameterSet& params, double h, double tol) {
    if (h <= 0.0) throw std::invalid_argument("grad_check: h must be positive");
    const double l0 = loss_fn(params);
    const double l1 = loss_fn(params);
    if (l0 != l1) throw std::runtime_error("grad_check: loss_fn is not deterministic");

    const GradMap analytic = grad_fn(params);
    GradCheckReport report;
    ParameterSet work = params;

    for (const auto& name : params.trainable_names()) {
        GradCheckEntry entry{name, 0.0};
        Tensor& t = work.at(name);
        const Tensor* ga = analytic.count(name) ? &analytic.at(name) : nullptr;
        for (std::size_t i = 0; i < t.v.size(); ++i) {
            const double orig = t.v[i];
            t.v[i] = orig + h;
            const double fp = loss_fn(work);
            t.v[i] = orig - h;
            const double fm = loss_fn(work);
            t.v[i] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double g = ga ? ga->v[i] : 0.0;
            const double denom = std::max({1.0, std::abs(g), std::abs(fd)});
            const double rel = std::abs(g - fd) / denom;
            if (rel > entry.max_rel_err) entry.max_rel_err = rel;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = name;
            }
        }
        report.per_param.push_back(entry);
    }
    report.pass = report.max_rel_err <= tol;
    return report;
}

} // namespace fastturn::nn
