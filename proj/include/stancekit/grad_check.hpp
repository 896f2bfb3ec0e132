#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "stancekit/param_store.hpp"
#include "stancekit/rng.hpp"

namespace stancekit {

struct GradCheckReport {
    struct Item {
        std::string name;
        double max_rel_err = 0.0;
        double max_abs_err = 0.0;
        std::size_t coords_checked = 0;
    };
    std::vector<Item> items;
    double worst_rel_err = 0.0;

    bool within(double tol) const { return worst_rel_err < tol; }
};

/// Central-difference verification of analytic gradients.
///
/// `loss` must evaluate the objective from the store's current values without
/// touching gradient state. `populate_grads` must zero the store's gradients
/// and refill them via a full forward/backward pass. Every trainable entry is
/// checked; when a tensor has more elements than `max_coords_per_param`, a
/// deterministic subset is sampled. The comparison uses a guarded relative
/// error |fd - an| / max(|fd|, |an|, floor) so that near-zero pairs do not
/// blow up the ratio.
inline GradCheckReport check_gradients(ParamStore& store,
                                       const std::function<double()>& loss,
                                       const std::function<void()>& populate_grads,
                                       double h = 1e-5,
                                       std::size_t max_coords_per_param = 64,
                                       std::uint64_t sample_seed = 0x9d5f,
                                       double denom_floor = 1e-8) {
    populate_grads();
    GradCheckReport report;
    RngStream sampler(sample_seed);
    for (const auto& name : store.trainable_names()) {
        if (!store.has_grad(name)) fail("numerics", "gradient check: no gradient for " + name);
        Tensor analytic = store.grad(name); // copy; FD loop reruns forward passes
        Tensor& value = store.tensor(name);
        const std::size_t n = value.size();
        std::vector<std::size_t> coords;
        if (n <= max_coords_per_param) {
            coords.resize(n);
            for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            RngStream local = sampler.derive(name);
            coords = local.sample_indices(n, max_coords_per_param);
        }
        GradCheckReport::Item item;
        item.name = name;
        item.coords_checked = coords.size();
        auto data = value.data();
        for (std::size_t c : coords) {
            const Real keep = data[c];
            data[c] = keep + static_cast<Real>(h);
            const double up = loss();
            data[c] = keep - static_cast<Real>(h);
            const double down = loss();
            data[c] = keep;
            if (!std::isfinite(up) || !std::isfinite(down))
                fail("numerics", "gradient check: non-finite loss when perturbing " + name);
            const double fd = (up - down) / (2.0 * h);
            const double an = static_cast<double>(analytic.data()[c]);
            const double abs_err = std::abs(fd - an);
            const double rel = abs_err / std::max({std::abs(fd), std::abs(an), denom_floor});
            item.max_abs_err = std::max(item.max_abs_err, abs_err);
            item.max_rel_err = std::max(item.max_rel_err, rel);
        }
        report.worst_rel_err = std::max(report.worst_rel_err, item.max_rel_err);
        report.items.push_back(std::move(item));
    }
    return report;
}

} // namespace stancekit
