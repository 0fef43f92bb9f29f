#ifndef IVNET_AUTODIFF_GRAD_CHECK_HPP
#define IVNET_AUTODIFF_GRAD_CHECK_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ivnet/autodiff/graph.hpp"
#include "ivnet/util/rng.hpp"

namespace ivnet::ad {

struct GradCheckOptions {
    double eps = 1e-5;
    double tol = 1e-4;
    /// Coordinates sampled per tensor; 0 checks every coordinate.
    std::size_t samples_per_tensor = 0;
    std::uint64_t seed = 1;
    /// Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
    /// vanishing gradients from amplifying round-off.
    double floor = 1e-6;
};

struct GradCheckReport {
    bool passed = false;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::string worst;  // "<tensor>[<index>]: analytic=..., numeric=..."
};

using NamedTensor = std::pair<std::string, Tensor>;

/// Compare analytic gradients of `f` w.r.t. `params` against central
/// differences (f(x+eps) - f(x-eps)) / (2 eps). `f` must be deterministic
/// and rebuild its graph on every call.
inline GradCheckReport grad_check(const std::function<Tensor()> &f, std::vector<NamedTensor> params,
                                  const GradCheckOptions &opt = {}) {
    if (opt.eps < 1e-7 || opt.eps > 1e-4) {
        throw Error(fmt::format("grad_check: eps {} outside [1e-7, 1e-4]", opt.eps));
    }
    for (auto &[name, t] : params) {
        t.zero_grad();
    }
    backward(f());
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto &[name, t] : params) {
        analytic.emplace_back(t.grad().begin(), t.grad().end());
    }

    GradCheckReport report;
    Rng rng(opt.seed);
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto &[name, t] = params[p];
        std::vector<std::size_t> coords(t.size());
        for (std::size_t i = 0; i < coords.size(); ++i) {
            coords[i] = i;
        }
        if (opt.samples_per_tensor != 0 && opt.samples_per_tensor < coords.size()) {
            rng.shuffle(coords);
            coords.resize(opt.samples_per_tensor);
        }
        auto values = t.mutable_data();
        for (const std::size_t i : coords) {
            const double saved = values[i];
            values[i] = saved + opt.eps;
            const double up = f().item();
            values[i] = saved - opt.eps;
            const double down = f().item();
            values[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw NumericError(fmt::format("grad_check: non-finite objective when perturbing {}[{}]", name, i));
            }
            const double numeric = (up - down) / (2.0 * opt.eps);
            const double a = analytic[p][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
            const double rel = std::abs(a - numeric) / denom;
            ++report.checked;
            if (rel >= report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst = fmt::format("{}[{}]: analytic={:.10g}, numeric={:.10g}", name, i, a, numeric);
            }
        }
    }
    report.passed = report.max_rel_error < opt.tol;
    return report;
}

}  // namespace ivnet::ad

#endif
