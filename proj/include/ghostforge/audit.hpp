#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ghostforge/gradcheck.hpp"
#include "ghostforge/msgan.hpp"

namespace ghostforge {

// Finite-difference audit of every differentiable building block, at the
// granularity the CLI exposes. Thresholds: 1e-8 for linear ops, 1e-6 for
// elementwise/nonlinear primitives, 1e-4 for network-scale composites.

struct AuditRow {
    std::string name;
    double max_rel_err = 0.0;
    double threshold = 0.0;
    bool pass() const { return max_rel_err < threshold; }
};

enum class AuditScope { ops, mafe, fusion, generator, discriminator, loss };

inline const char* audit_scope_name(AuditScope scope) {
    switch (scope) {
        case AuditScope::ops: return "ops";
        case AuditScope::mafe: return "mafe";
        case AuditScope::fusion: return "fusion";
        case AuditScope::generator: return "generator";
        case AuditScope::discriminator: return "discriminator";
        case AuditScope::loss: return "loss";
    }
    return "?";
}

namespace detail {

inline Tensor audit_tensor(const Shape& s, std::uint64_t seed, bool requires_grad,
                           double lo = -1.0, double hi = 1.0) {
    CounterRng rng(seed);
    std::vector<double> v(s.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.uniform(i, lo, hi);
    return Tensor::from_vector(s, std::move(v), requires_grad);
}

inline void audit_push(std::vector<AuditRow>& rows, const std::string& name, double err,
                       double threshold) {
    rows.push_back({name, err, threshold});
}

}  // namespace detail

inline std::vector<AuditRow> audit_ops(std::uint64_t seed) {
    using detail::audit_tensor;
    constexpr double kLinear = 1e-8;
    constexpr double kElementwise = 1e-6;
    std::vector<AuditRow> rows;

    {
        Tensor x = audit_tensor({1, 2, 6, 6}, derive_key(seed, 1), true);
        Tensor w = audit_tensor({3, 2, 3, 3}, derive_key(seed, 2), true);
        Tensor b = audit_tensor({1, 3, 1, 1}, derive_key(seed, 3), true);
        Tensor t = audit_tensor({1, 3, 6, 6}, derive_key(seed, 4), false);
        // sum heads keep the objective linear in the perturbed argument, so
        // the tight linear threshold measures the operator, not FD roundoff
        auto f = [&] { return sum(conv2d(x, w, b, 1, 1, 1)); };
        detail::audit_push(rows, "conv2d/x", grad_check(f, x), kLinear);
        detail::audit_push(rows, "conv2d/w", grad_check(f, w), kLinear);
        detail::audit_push(rows, "conv2d/b", grad_check(f, b), kLinear);
        auto fd = [&] { return sum(conv2d(x, w, b, 2, 2, 2)); };
        detail::audit_push(rows, "conv2d/stride2-dilation2", grad_check(fd, x), kLinear);
        auto fq = [&] { return mse(conv2d(x, w, b, 1, 1, 1), t); };
        detail::audit_push(rows, "conv2d/quadratic-head", grad_check(fq, x), kElementwise);
    }
    {
        Tensor x = audit_tensor({1, 3, 5, 5}, derive_key(seed, 5), true);
        auto f = [&] { return sum(global_avg_pool(x)); };
        detail::audit_push(rows, "global_avg_pool", grad_check(f, x), kLinear);
    }
    {
        Tensor x = audit_tensor({1, 2, 6, 6}, derive_key(seed, 6), true);
        Tensor t = audit_tensor({1, 2, 6, 6}, derive_key(seed, 7), false);
        auto fr = [&] { return mse(relu(x), t); };
        auto fs = [&] { return mse(sigmoid(x), t); };
        auto ft = [&] { return mse(tanh(x), t); };
        auto fl = [&] { return mse(leaky_relu(x, 0.2), t); };
        detail::audit_push(rows, "relu", grad_check(fr, x), kElementwise);
        detail::audit_push(rows, "sigmoid", grad_check(fs, x), kElementwise);
        detail::audit_push(rows, "tanh", grad_check(ft, x), kElementwise);
        detail::audit_push(rows, "leaky_relu", grad_check(fl, x), kElementwise);
    }
    {
        Tensor x = audit_tensor({1, 4, 5, 5}, derive_key(seed, 8), true);
        Tensor r = audit_tensor({1, 4, 1, 1}, derive_key(seed, 9), true);
        auto f = [&] { return mean_square(scale_channels(x, r)); };
        detail::audit_push(rows, "scale_channels/x", grad_check(f, x), kElementwise);
        detail::audit_push(rows, "scale_channels/r", grad_check(f, r), kElementwise);
    }
    {
        Tensor x = audit_tensor({1, 3, 4, 4}, derive_key(seed, 10), true);
        Tensor m = audit_tensor({1, 1, 4, 4}, derive_key(seed, 11), true);
        auto f = [&] { return mean_square(scale_spatial(x, m)); };
        detail::audit_push(rows, "scale_spatial/x", grad_check(f, x), kElementwise);
        detail::audit_push(rows, "scale_spatial/m", grad_check(f, m), kElementwise);
    }
    {
        Tensor x = audit_tensor({1, 2, 3, 3}, derive_key(seed, 12), true);
        Tensor s = audit_tensor({1, 1, 6, 6}, derive_key(seed, 13), false);
        auto f = [&] { return sum(scale_spatial(upsample_nearest(x, 2), s)); };
        detail::audit_push(rows, "upsample_nearest", grad_check(f, x), kLinear);
    }
    {
        Tensor x = audit_tensor({1, 2, 6, 6}, derive_key(seed, 14), true);
        Tensor t = audit_tensor({1, 2, 3, 3}, derive_key(seed, 15), false);
        auto f = [&] { return mse(maxpool2(x), t); };
        detail::audit_push(rows, "maxpool2", grad_check(f, x), kElementwise);
    }
    {
        Tensor a = audit_tensor({1, 2, 4, 4}, derive_key(seed, 16), true);
        Tensor b = audit_tensor({1, 3, 4, 4}, derive_key(seed, 17), true);
        Tensor r = audit_tensor({1, 5, 1, 1}, derive_key(seed, 18), false);
        auto f = [&] { return sum(scale_channels(concat_channels({a, b}), r)); };
        detail::audit_push(rows, "concat_channels", grad_check(f, a), kLinear);
    }
    {
        Tensor a = audit_tensor({1, 1, 4, 4}, derive_key(seed, 19), true);
        Tensor b = audit_tensor({1, 1, 4, 4}, derive_key(seed, 20), true);
        Tensor c = audit_tensor({1, 1, 4, 4}, derive_key(seed, 21), true);
        Tensor t = audit_tensor({1, 1, 4, 4}, derive_key(seed, 22), false);
        auto f = [&] {
            const auto ws = softmax_over({a, b, c});
            return add(mse(ws[0], t), mean_square(ws[2]));
        };
        detail::audit_push(rows, "softmax_over", grad_check(f, b), kElementwise);
    }
    {
        Tensor a = audit_tensor({1, 2, 4, 4}, derive_key(seed, 23), true);
        Tensor b = audit_tensor({1, 2, 4, 4}, derive_key(seed, 24), true);
        auto fa = [&] { return sum(add(a, scale(b, 0.7))); };
        auto fs = [&] { return sum(scale(a, 0.37)); };
        auto fm = [&] { return mse(a, b); };
        auto fq = [&] { return mean_square(a); };
        auto fz = [&] { return sum(a); };
        detail::audit_push(rows, "add", grad_check(fa, a), kLinear);
        detail::audit_push(rows, "scale", grad_check(fs, a), kLinear);
        detail::audit_push(rows, "mse", grad_check(fm, a), kElementwise);
        detail::audit_push(rows, "mean_square", grad_check(fq, a), kElementwise);
        detail::audit_push(rows, "sum", grad_check(fz, a), kLinear);
    }
    return rows;
}

inline std::vector<AuditRow> audit_mafe(std::uint64_t seed) {
    constexpr double kComposite = 1e-4;
    std::vector<AuditRow> rows;
    ParamStore store(derive_key(seed, 100));
    MafeUnit unit(store, "audit/mafe", 4, {1, 2, 3}, 4);
    Tensor x = detail::audit_tensor({1, 4, 12, 12}, derive_key(seed, 101), true);
    Tensor t = detail::audit_tensor({1, 4, 12, 12}, derive_key(seed, 102), false);
    auto f = [&] { return mse(unit.forward(x), t); };
    detail::audit_push(rows, "mafe/input", grad_check(f, x, 1e-5, 96), kComposite);
    Tensor branch_w = store.at("audit/mafe/branch1/w").tensor;
    Tensor up_w = store.at("audit/mafe/attn_up/w").tensor;
    detail::audit_push(rows, "mafe/branch-weights", grad_check(f, branch_w, 1e-5, 48), kComposite);
    detail::audit_push(rows, "mafe/attention-weights", grad_check(f, up_w, 1e-5, 16), kComposite);
    return rows;
}

inline std::vector<AuditRow> audit_fusion(std::uint64_t seed) {
    constexpr double kComposite = 1e-4;
    std::vector<AuditRow> rows;
    ParamStore store(derive_key(seed, 200));
    FusionUnit unit(store, "audit/fusion", {8, 6, 4, 3}, 3);
    std::vector<Tensor> levels = {
        detail::audit_tensor({1, 8, 2, 2}, derive_key(seed, 201), true),
        detail::audit_tensor({1, 6, 4, 4}, derive_key(seed, 202), true),
        detail::audit_tensor({1, 4, 8, 8}, derive_key(seed, 203), true),
        detail::audit_tensor({1, 3, 16, 16}, derive_key(seed, 204), true),
    };
    Tensor t = detail::audit_tensor({1, 3, 16, 16}, derive_key(seed, 205), false);
    auto f = [&] { return mse(unit.forward(levels), t); };
    detail::audit_push(rows, "fusion/coarsest-level", grad_check(f, levels[0], 1e-5, 32), kComposite);
    detail::audit_push(rows, "fusion/finest-level", grad_check(f, levels[3], 1e-5, 64), kComposite);
    Tensor logit_w = store.at("audit/fusion/level2/logit/w").tensor;
    Tensor match_w = store.at("audit/fusion/level0/match/w").tensor;
    detail::audit_push(rows, "fusion/logit-weights", grad_check(f, logit_w, 1e-5), kComposite);
    detail::audit_push(rows, "fusion/match-weights", grad_check(f, match_w, 1e-5, 24), kComposite);
    return rows;
}

inline std::vector<AuditRow> audit_generator(std::uint64_t seed) {
    constexpr double kComposite = 1e-4;
    std::vector<AuditRow> rows;
    GeneratorConfig cfg;
    cfg.base_channels = 4;
    Generator generator(cfg, derive_key(seed, 300));
    Tensor x = detail::audit_tensor({1, 1, 16, 16}, derive_key(seed, 301), true, 0.05, 0.95);
    Tensor t = detail::audit_tensor({1, 1, 16, 16}, derive_key(seed, 302), false, 0.05, 0.95);
    auto f = [&] { return mse(generator.forward(x), t); };
    detail::audit_push(rows, "generator/input", grad_check(f, x, 1e-5, 64), kComposite);
    Tensor enc_w = generator.params().at("g/enc0/conv/w").tensor;
    Tensor head_w = generator.params().at("g/head/w").tensor;
    detail::audit_push(rows, "generator/encoder-weights", grad_check(f, enc_w, 1e-5, 24), kComposite);
    detail::audit_push(rows, "generator/head-weights", grad_check(f, head_w, 1e-5), kComposite);
    return rows;
}

inline std::vector<AuditRow> audit_discriminator(std::uint64_t seed) {
    constexpr double kComposite = 1e-4;
    std::vector<AuditRow> rows;
    DiscriminatorConfig cfg;
    cfg.width_factor = 0.125;
    Discriminator d(cfg, derive_key(seed, 400));
    Tensor x = detail::audit_tensor({1, 1, 16, 16}, derive_key(seed, 401), true, 0.05, 0.95);
    auto f = [&] { return mean_square(sigmoid(d.forward(x))); };
    detail::audit_push(rows, "discriminator/input", grad_check(f, x, 1e-5, 64), kComposite);
    Tensor w0 = d.params().at("d/conv0/w").tensor;
    Tensor w3 = d.params().at("d/conv3/w").tensor;
    detail::audit_push(rows, "discriminator/first-layer", grad_check(f, w0, 1e-5, 32), kComposite);
    detail::audit_push(rows, "discriminator/patch-layer", grad_check(f, w3, 1e-5, 32), kComposite);
    return rows;
}

inline std::vector<AuditRow> audit_loss(std::uint64_t seed) {
    constexpr double kComposite = 1e-4;
    std::vector<AuditRow> rows;
    GeneratorConfig gcfg;
    gcfg.base_channels = 4;
    DiscriminatorConfig dcfg;
    dcfg.width_factor = 0.125;
    Generator generator(gcfg, derive_key(seed, 500));
    Discriminator discriminator(dcfg, derive_key(seed, 501));
    PerceptualExtractor extractor(derive_key(seed, 502));
    LossWeights weights;
    Tensor x = detail::audit_tensor({1, 1, 16, 16}, derive_key(seed, 503), true, 0.05, 0.95);
    Tensor gt = detail::audit_tensor({1, 1, 16, 16}, derive_key(seed, 504), false, 0.05, 0.95);
    auto total = [&] {
        const Tensor gen = generator.forward(x);
        return losses(gt, gen, discriminator, extractor, weights).total;
    };
    detail::audit_push(rows, "loss/total-wrt-input", grad_check(total, x, 1e-5, 48), kComposite);
    Tensor gw = generator.params().at("g/dec3/conv/w").tensor;
    detail::audit_push(rows, "loss/total-wrt-generator", grad_check(total, gw, 1e-5, 32), kComposite);
    auto adv_d = [&] {
        Tensor gen;
        {
            NoGrad guard;
            gen = generator.forward(x);
        }
        return losses(gt, gen, discriminator, extractor, weights).adv_d;
    };
    Tensor dw = discriminator.params().at("d/conv1/w").tensor;
    detail::audit_push(rows, "loss/adv_d-wrt-discriminator", grad_check(adv_d, dw, 1e-5, 32),
                       kComposite);
    return rows;
}

inline std::vector<AuditRow> run_audit(AuditScope scope, std::uint64_t seed) {
    switch (scope) {
        case AuditScope::ops: return audit_ops(seed);
        case AuditScope::mafe: return audit_mafe(seed);
        case AuditScope::fusion: return audit_fusion(seed);
        case AuditScope::generator: return audit_generator(seed);
        case AuditScope::discriminator: return audit_discriminator(seed);
        case AuditScope::loss: return audit_loss(seed);
    }
    throw ConfigError("run_audit: bad scope");
}

}  // namespace ghostforge
