#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "gan2vec/tensor.hpp"

namespace testsup {

// Central finite difference of f with respect to every element of t.
// f must re-run the forward pass from scratch; it observes the perturbation
// because ops read leaf values at call time through the shared handle.
inline std::vector<double> fd_grad(gan2vec::Tensor t, const std::function<double()>& f,
                                   double h = 1e-5) {
    std::vector<double>& v = t.mutable_values();
    std::vector<double> g(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double keep = v[i];
        v[i] = keep + h;
        const double up = f();
        v[i] = keep - h;
        const double dn = f();
        v[i] = keep;
        g[i] = (up - dn) / (2.0 * h);
    }
    return g;
}

// Max elementwise relative error with an absolute floor in the denominator,
// so near-zero pairs compare absolutely instead of blowing up.
inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b,
                          double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::fabs(a[i]), std::fabs(b[i]), floor});
        worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
    }
    return worst;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace testsup
