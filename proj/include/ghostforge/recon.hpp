#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "ghostforge/errors.hpp"
#include "ghostforge/image.hpp"
#include "ghostforge/measurement.hpp"
#include "ghostforge/optics.hpp"

namespace ghostforge {

enum class Estimator { covariance, differential };
enum class Normalize { minmax, none };

struct ReconConfig {
    Estimator estimator = Estimator::covariance;
    Normalize normalize = Normalize::minmax;
};

/// Correlation reconstruction over the measurement ensemble.
/// covariance:   G(x) = (1/n) sum_i B_i P_i(x) - [(1/n) sum_i B_i][(1/n) sum_i P_i(x)]
/// differential: G(x) = (1/n) sum_i (B_i - Bbar) P_i(x)
/// The two are algebraically identical and kept as numerically distinct paths.
/// minmax maps [min,max] to [0,1]; a constant field maps to all 0.5.
inline Image reconstruct(const BucketSeries& buckets, const PatternStack& patterns,
                         const ReconConfig& cfg = {}) {
    const int n = patterns.count;
    if (static_cast<int>(buckets.count()) != n)
        throw ConfigError("reconstruct: bucket count " + std::to_string(buckets.count()) +
                          " does not match pattern count " + std::to_string(n));
    if (n < 2) throw ConfigError("reconstruct: need at least 2 measurements, got " +
                                 std::to_string(n));

    const std::size_t plane = patterns.plane_size();
    const double inv_n = 1.0 / static_cast<double>(n);

    double bucket_mean = 0.0;
    for (double b : buckets.values) bucket_mean += b;
    bucket_mean *= inv_n;

    std::vector<double> field(plane, 0.0);
    if (cfg.estimator == Estimator::covariance) {
        std::vector<double> pattern_mean(plane, 0.0);
        for (int i = 0; i < n; ++i) {
            const double* pat = patterns.plane(i);
            const double b = buckets.values[static_cast<std::size_t>(i)];
            for (std::size_t p = 0; p < plane; ++p) {
                field[p] += b * pat[p];
                pattern_mean[p] += pat[p];
            }
        }
        for (std::size_t p = 0; p < plane; ++p)
            field[p] = field[p] * inv_n - bucket_mean * (pattern_mean[p] * inv_n);
    } else {
        for (int i = 0; i < n; ++i) {
            const double* pat = patterns.plane(i);
            const double d = buckets.values[static_cast<std::size_t>(i)] - bucket_mean;
            for (std::size_t p = 0; p < plane; ++p) field[p] += d * pat[p];
        }
        for (std::size_t p = 0; p < plane; ++p) field[p] *= inv_n;
    }

    Image out;
    out.height = patterns.height;
    out.width = patterns.width;
    if (cfg.normalize == Normalize::minmax) {
        const auto [lo_it, hi_it] = std::minmax_element(field.begin(), field.end());
        const double lo = *lo_it, hi = *hi_it;
        if (hi > lo) {
            const double inv_range = 1.0 / (hi - lo);
            for (double& v : field) v = (v - lo) * inv_range;
        } else {
            for (double& v : field) v = 0.5;
        }
        out.data = std::move(field);
    } else {
        out.data = std::move(field);
    }
    return out;
}

struct ReconPair {
    Image clean;
    Image turbulent;
};

/// Simulate and reconstruct the same object twice with the same patterns:
/// once with turbulence disabled, once as configured.
inline ReconPair reconstruct_pair(const Image& obj, const SimConfig& cfg_sim,
                                  const ReconConfig& cfg_rec = {}) {
    cfg_sim.validate();
    const PatternStack patterns = make_patterns(cfg_sim);

    SimConfig clean_cfg = cfg_sim;
    clean_cfg.turbulence.mode = TurbulenceMode::none;

    ReconPair pair;
    const BucketSeries clean_buckets = measure(obj, patterns, clean_cfg.turbulence,
                                               cfg_sim.detector_noise_sigma, cfg_sim.seed);
    const BucketSeries turb_buckets = measure(obj, patterns, cfg_sim.turbulence,
                                              cfg_sim.detector_noise_sigma, cfg_sim.seed);
    pair.clean = reconstruct(clean_buckets, patterns, cfg_rec);
    pair.turbulent = reconstruct(turb_buckets, patterns, cfg_rec);
    return pair;
}

}  // namespace ghostforge
