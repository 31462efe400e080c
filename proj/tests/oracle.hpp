#pragma once

// Test-only numeric oracles. The finite-difference gradient here is the
// independent check for every analytic backward pass in the library; it only
// re-evaluates the forward function, never the tape.

#include <cmath>
#include <functional>
#include <vector>

#include "lmkit/tensor.hpp"

namespace oracle {

// Central finite differences of a scalar-valued forward function w.r.t. one
// tensor, perturbing the shared buffer in place.
inline std::vector<double> numeric_gradient(const std::function<double()>& f, lmkit::Tensor& x,
                                            double h = 1e-3) {
    std::vector<double> g(static_cast<std::size_t>(x.numel()));
    float* d = x.data();
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        const float keep = d[i];
        d[i] = static_cast<float>(keep + h);
        const double up = f();
        d[i] = static_cast<float>(keep - h);
        const double down = f();
        d[i] = keep;
        g[static_cast<std::size_t>(i)] = (up - down) / (2.0 * h);
    }
    return g;
}

// Relative error with a unit floor: strict relative error above magnitude 1,
// absolute error below it. This is the f32-appropriate reading of
// "relative error < 1e-3" (tiny gradients drown in f32 forward noise under a
// strict ratio).
inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) / denom;
}

// Max rel_err between a tensor's accumulated grad and a finite-difference
// gradient of `f` w.r.t. it. Returns +inf if the grad is absent.
inline double max_grad_err(const std::function<double()>& f, lmkit::Tensor& x, double h = 1e-3) {
    if (!x.has_grad()) return std::numeric_limits<double>::infinity();
    std::vector<double> fd = numeric_gradient(f, x, h);
    double worst = 0.0;
    const float* g = x.grad();
    for (std::size_t i = 0; i < fd.size(); ++i) {
        worst = std::max(worst, rel_err(g[i], fd[i]));
    }
    return worst;
}

}  // namespace oracle
