#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

#include "ghostforge/ops.hpp"
#include "ghostforge/rng.hpp"
#include "ghostforge/tensor.hpp"

namespace ghostforge {

/// Central-difference audit of the tape gradient. `forward` must rebuild the
/// computation from the same leaf tensors on every call and return a scalar;
/// `wrt` is the leaf whose coordinates are perturbed. Returns the maximum
/// relative error with denominator max(|analytic|, |numeric|, 1e-8).
/// When `max_coords` is smaller than the tensor, a seeded subset is checked.
inline double grad_check(const std::function<Tensor()>& forward, Tensor wrt, double step = 1e-5,
                         std::size_t max_coords = SIZE_MAX,
                         std::uint64_t select_seed = 0x67726164ULL) {
    if (!wrt.requires_grad())
        throw ConfigError("grad_check: target tensor does not require grad");
    if (!(step > 0.0)) throw ConfigError("grad_check: step must be positive");

    std::vector<double> analytic(wrt.numel(), 0.0);
    {
        Tape tape;
        wrt.zero_grad();
        const Tensor y = forward();
        if (y.numel() != 1)
            throw ConfigError("grad_check: forward() must return a scalar, got " +
                              y.shape().str());
        tape.backward(y);
        if (wrt.has_grad()) analytic = wrt.grad();
        wrt.zero_grad();
    }

    std::vector<std::size_t> coords;
    if (wrt.numel() <= max_coords) {
        coords.resize(wrt.numel());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    } else {
        // seeded partial Fisher-Yates over the index range
        std::vector<std::size_t> all(wrt.numel());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        CounterRng rng(select_seed);
        for (std::size_t i = 0; i < max_coords; ++i) {
            const std::size_t j = i + rng.below(i, all.size() - i);
            std::swap(all[i], all[j]);
        }
        coords.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(max_coords));
        std::sort(coords.begin(), coords.end());
    }

    double max_rel = 0.0;
    {
        NoGrad guard;
        std::vector<double>& values = wrt.mutable_data();
        for (std::size_t idx : coords) {
            const double saved = values[idx];
            values[idx] = saved + step;
            const double up = forward().item();
            values[idx] = saved - step;
            const double down = forward().item();
            values[idx] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double denom = std::max({std::abs(analytic[idx]), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::abs(analytic[idx] - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace ghostforge
