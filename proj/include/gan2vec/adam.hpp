#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gan2vec/errors.hpp"
#include "gan2vec/tensor.hpp"

namespace gan2vec {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-parameter moment buffers plus the step counter driving bias correction.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;
};

// One Adam update with bias correction:
//   m <- b1 m + (1-b1) g          v <- b2 v + (1-b2) g^2
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
// The optimizer always descends; callers wanting ascent negate their loss.
inline void adam_step_inplace(std::vector<double>& p, const std::vector<double>& g, AdamState& s,
                              const AdamConfig& c) {
    if (s.m.empty()) {
        s.m.assign(p.size(), 0.0);
        s.v.assign(p.size(), 0.0);
    }
    if (g.size() != p.size() || s.m.size() != p.size())
        throw DimensionError("adam_step: parameter/gradient/state size mismatch");
    s.t += 1;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.t));
    for (std::size_t i = 0; i < p.size(); ++i) {
        s.m[i] = c.beta1 * s.m[i] + (1.0 - c.beta1) * g[i];
        s.v[i] = c.beta2 * s.v[i] + (1.0 - c.beta2) * g[i] * g[i];
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        p[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
}

class AdamOptimizer {
  public:
    AdamOptimizer() = default;
    AdamOptimizer(std::vector<Tensor> params, AdamConfig cfg)
        : params_(std::move(params)), states_(params_.size()), cfg_(cfg) {}

    // Applies one update from the gradients accumulated by backward().
    // Parameters without an accumulated gradient are treated as zero-grad
    // (their moments decay and the step counter still advances).
    void step() {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Tensor& p = params_[i];
            if (p.has_grad()) {
                adam_step_inplace(p.mutable_values(), p.grad(), states_[i], cfg_);
            } else {
                std::vector<double> zeros(p.values().size(), 0.0);
                adam_step_inplace(p.mutable_values(), zeros, states_[i], cfg_);
            }
        }
    }

    void zero_grad() { zero_grads(params_); }

    const std::vector<Tensor>& params() const { return params_; }
    std::vector<AdamState>& states() { return states_; }
    const std::vector<AdamState>& states() const { return states_; }
    const AdamConfig& config() const { return cfg_; }

  private:
    std::vector<Tensor> params_;
    std::vector<AdamState> states_;
    AdamConfig cfg_;
};

}  // namespace gan2vec
