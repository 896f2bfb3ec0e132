#pragma once

#include <cmath>
#include <cstddef>

#include "stancekit/error.hpp"
#include "stancekit/param_store.hpp"

namespace stancekit {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. One instance per parameter store; the step
/// counter lives in the optimizer, the moment buffers in the store (so they
/// ride along in checkpoints).
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    std::size_t steps_taken() const { return t_; }

    /// Applies one update to every trainable entry. A store with no trainable
    /// entries is left untouched (frozen modules simply skip optimization).
    /// Every trainable entry must have an accumulated gradient.
    void step(ParamStore& store) {
        const auto names = store.trainable_names();
        if (names.empty()) return;
        ++t_;
        const Real b1 = static_cast<Real>(cfg_.beta1);
        const Real b2 = static_cast<Real>(cfg_.beta2);
        const Real corr1 = Real(1) - static_cast<Real>(std::pow(cfg_.beta1, static_cast<double>(t_)));
        const Real corr2 = Real(1) - static_cast<Real>(std::pow(cfg_.beta2, static_cast<double>(t_)));
        for (const auto& name : names) {
            if (!store.has_grad(name))
                fail("numerics", "adam step without gradient for trainable parameter " + name);
            const Tensor& g = store.grad(name);
            auto& mom = store.moments(name);
            auto m = mom.m.data();
            auto v = mom.v.data();
            auto p = store.tensor(name).data();
            auto gd = g.data();
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = b1 * m[i] + (Real(1) - b1) * gd[i];
                v[i] = b2 * v[i] + (Real(1) - b2) * gd[i] * gd[i];
                const Real mhat = m[i] / corr1;
                const Real vhat = v[i] / corr2;
                p[i] -= static_cast<Real>(cfg_.lr) * mhat /
                        (std::sqrt(vhat) + static_cast<Real>(cfg_.eps));
            }
            debug_check_finite(store.tensor(name), "adam update");
        }
    }

private:
    AdamConfig cfg_;
    std::size_t t_ = 0;
};

} // namespace stancekit
