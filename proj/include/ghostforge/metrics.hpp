#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "ghostforge/errors.hpp"
#include "ghostforge/image.hpp"

namespace ghostforge {

struct MetricReport {
    double ssim = 0.0;
    double psnr_db = 0.0;  // +inf encodes zero error

    /// {"ssim": number, "psnr_db": number|"inf"}
    std::string to_json() const;
};

namespace detail {

inline void require_same_dims(const Image& a, const Image& b, const char* op) {
    if (a.height != b.height || a.width != b.width)
        throw ConfigError(std::string(op) + ": dimension mismatch " + std::to_string(a.height) +
                          "x" + std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                          std::to_string(b.width));
}

}  // namespace detail

/// 10*log10(peak^2 / MSE); +inf when MSE == 0. Reductions run left to right.
inline double psnr(const Image& a, const Image& b, double peak = 1.0) {
    detail::require_same_dims(a, b, "psnr");
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sq += d * d;
    }
    const double mse = sq / static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

namespace detail {

// 11x11 Gaussian window, sigma 1.5, normalized to unit sum. Returned as the
// separable 1-D profile (the 2-D window is the outer product).
inline const std::vector<double>& ssim_window_1d() {
    static const std::vector<double> win = [] {
        std::vector<double> w(11);
        double sum = 0.0;
        for (int i = 0; i < 11; ++i) {
            const double d = static_cast<double>(i - 5);
            w[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            sum += w[i];
        }
        for (double& v : w) v /= sum;
        return w;
    }();
    return win;
}

// Valid-mode separable correlation with the SSIM window profile:
// rows first, then columns. Output is (h-10) x (w-10).
inline std::vector<double> ssim_filter_valid(const std::vector<double>& src, int h, int w) {
    const std::vector<double>& win = ssim_window_1d();
    const int ow = w - 10;
    const int oh = h - 10;
    std::vector<double> rows(static_cast<std::size_t>(h) * ow);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < ow; ++c) {
            double acc = 0.0;
            for (int k = 0; k < 11; ++k) acc += win[k] * src[static_cast<std::size_t>(r) * w + c + k];
            rows[static_cast<std::size_t>(r) * ow + c] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int r = 0; r < oh; ++r) {
        for (int c = 0; c < ow; ++c) {
            double acc = 0.0;
            for (int k = 0; k < 11; ++k) acc += win[k] * rows[static_cast<std::size_t>(r + k) * ow + c];
            out[static_cast<std::size_t>(r) * ow + c] = acc;
        }
    }
    return out;
}

}  // namespace detail

/// Mean local SSIM, Gaussian window 11x11 sigma 1.5, K1=0.01, K2=0.03, L=1.
/// Local statistics over valid window positions only.
inline double ssim(const Image& a, const Image& b) {
    detail::require_same_dims(a, b, "ssim");
    if (a.height < 11 || a.width < 11)
        throw ConfigError("ssim: image smaller than the 11x11 window: " +
                          std::to_string(a.height) + "x" + std::to_string(a.width));

    const int h = a.height, w = a.width;
    const std::size_t n = a.size();
    std::vector<double> aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        aa[i] = a.data[i] * a.data[i];
        bb[i] = b.data[i] * b.data[i];
        ab[i] = a.data[i] * b.data[i];
    }
    const std::vector<double> mu_a = detail::ssim_filter_valid(a.data, h, w);
    const std::vector<double> mu_b = detail::ssim_filter_valid(b.data, h, w);
    const std::vector<double> s_aa = detail::ssim_filter_valid(aa, h, w);
    const std::vector<double> s_bb = detail::ssim_filter_valid(bb, h, w);
    const std::vector<double> s_ab = detail::ssim_filter_valid(ab, h, w);

    constexpr double c1 = 0.01 * 0.01;  // (K1*L)^2
    constexpr double c2 = 0.03 * 0.03;  // (K2*L)^2
    double total = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double va = s_aa[i] - ma * ma;
        const double vb = s_bb[i] - mb * mb;
        const double cov = s_ab[i] - ma * mb;
        const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        total += num / den;
    }
    return total / static_cast<double>(mu_a.size());
}

inline MetricReport evaluate_pair(const Image& truth, const Image& candidate) {
    MetricReport report;
    report.ssim = ssim(truth, candidate);
    report.psnr_db = psnr(truth, candidate);
    return report;
}

inline std::string MetricReport::to_json() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", ssim);
    std::string out = std::string("{\"ssim\": ") + buf + ", \"psnr_db\": ";
    if (std::isinf(psnr_db)) {
        out += "\"inf\"";
    } else {
        std::snprintf(buf, sizeof(buf), "%.17g", psnr_db);
        out += buf;
    }
    out += "}";
    return out;
}

}  // namespace ghostforge
