#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ghostforge/errors.hpp"
#include "ghostforge/fft.hpp"
#include "ghostforge/image.hpp"
#include "ghostforge/measurement.hpp"
#include "ghostforge/rng.hpp"

namespace ghostforge {

enum class PatternKind { binary_random, hadamard };
enum class TurbulenceMode { none, gaussian_blur, phase_screen };
enum class RefreshPolicy { per_measurement, static_screen };

struct TurbulenceParams {
    TurbulenceMode mode = TurbulenceMode::none;
    double r0 = 8.0;           // Fried parameter, grid units; smaller = stronger
    double outer_scale = 0.0;  // von Karman L0, grid units; 0 selects 16 * screen size
    double blur_sigma = 0.0;   // gaussian-blur mode, pixels
    double tilt_sigma = 0.0;   // gaussian-blur mode, pixels
    RefreshPolicy refresh = RefreshPolicy::static_screen;

    void validate() const {
        if (!(r0 > 0.0)) throw ConfigError("TurbulenceParams: r0 must be > 0");
        if (blur_sigma < 0.0) throw ConfigError("TurbulenceParams: blur_sigma must be >= 0");
        if (tilt_sigma < 0.0) throw ConfigError("TurbulenceParams: tilt_sigma must be >= 0");
        if (outer_scale < 0.0) throw ConfigError("TurbulenceParams: outer scale must be >= 0");
    }

    double resolved_outer_scale(int size) const {
        return outer_scale > 0.0 ? outer_scale : 16.0 * static_cast<double>(size);
    }
};

struct SimConfig {
    int image_size = 64;
    int n_measurements = 4096;
    PatternKind pattern_kind = PatternKind::binary_random;
    TurbulenceParams turbulence;
    double detector_noise_sigma = 0.0;
    std::uint64_t seed = 1;

    void validate() const {
        if (image_size < 8) throw ConfigError("SimConfig: image_size must be >= 8");
        if (n_measurements < 1) throw ConfigError("SimConfig: n_measurements must be >= 1");
        if (pattern_kind == PatternKind::hadamard &&
            static_cast<long long>(n_measurements) >
                static_cast<long long>(image_size) * image_size)
            throw ConfigError("SimConfig: hadamard n_measurements must be <= image_size^2");
        turbulence.validate();
        if (detector_noise_sigma < 0.0)
            throw ConfigError("SimConfig: detector_noise_sigma must be >= 0");
    }
};

struct PhaseScreen {
    int height = 0;
    int width = 0;
    std::vector<double> phase;  // radians, zero mean

    double at(int r, int c) const { return phase[static_cast<std::size_t>(r) * width + c]; }
};

// ---------------------------------------------------------------------------
// Illumination patterns

/// Binary-random mode draws an equiprobable {0,1} per pixel from a counter
/// generator keyed by (seed, pattern index). Hadamard mode takes rows of the
/// naturally ordered Walsh-Hadamard matrix of order image_size^2, reshaped to
/// a plane and remapped from {-1,1} to {0,1}.
inline PatternStack make_patterns(const SimConfig& cfg) {
    cfg.validate();
    const int s = cfg.image_size;
    PatternStack stack;
    stack.count = cfg.n_measurements;
    stack.height = s;
    stack.width = s;
    stack.binary = true;
    const std::size_t plane = static_cast<std::size_t>(s) * s;
    stack.planes.resize(static_cast<std::size_t>(stack.count) * plane);

    if (cfg.pattern_kind == PatternKind::binary_random) {
        for (int i = 0; i < stack.count; ++i) {
            CounterRng rng(cfg.seed, static_cast<std::uint64_t>(i));
            double* dst = stack.plane(i);
            for (std::size_t p = 0; p < plane; ++p)
                dst[p] = static_cast<double>(rng.coin(p));
        }
    } else {
        if (!detail::is_pow2(static_cast<std::size_t>(s)))
            throw ConfigError("make_patterns: hadamard requires power-of-two image_size, got " +
                              std::to_string(s));
        // Sylvester ordering: H[i][j] = (-1)^popcount(i & j).
        for (int i = 0; i < stack.count; ++i) {
            double* dst = stack.plane(i);
            for (std::size_t p = 0; p < plane; ++p) {
                const int parity =
                    std::popcount(static_cast<std::uint64_t>(i) & static_cast<std::uint64_t>(p)) & 1;
                dst[p] = parity ? 0.0 : 1.0;
            }
        }
    }
    return stack;
}

// ---------------------------------------------------------------------------
// Turbulence phase screens

/// Spectral synthesis of a thin von Karman phase screen:
/// complex white noise is shaped by sqrt(Phi(f)) with
/// Phi(f) = 0.023 r0^(-5/3) (f^2 + 1/L0^2)^(-11/6) and inverse-transformed.
/// Frequencies are in cycles per grid unit. Deterministic in (params, size, seed).
inline PhaseScreen make_phase_screen(const TurbulenceParams& params, int size, std::uint64_t seed) {
    params.validate();
    if (params.mode != TurbulenceMode::phase_screen)
        throw ConfigError("make_phase_screen: mode must be phase-screen");
    if (size < 2) throw ConfigError("make_phase_screen: size must be >= 2");

    const int n = size;
    const double l0 = params.resolved_outer_scale(size);
    const double f0_sq = 1.0 / (l0 * l0);
    const double coeff = 0.023 * std::pow(params.r0, -5.0 / 3.0);
    const double df = 1.0 / static_cast<double>(n);

    // Mean PSD over a spectral cell. The spectrum spans many decades across
    // the cells nearest DC, where a midpoint sample loses a large fraction of
    // the integrated power; those cells get a 16x16 midpoint average.
    const auto cell_psd = [&](double fr, double fc, double width, int m) {
        double acc = 0.0;
        for (int a = 0; a < m; ++a) {
            const double ur = fr + width * ((a + 0.5) / m - 0.5);
            for (int b = 0; b < m; ++b) {
                const double uc = fc + width * ((b + 0.5) / m - 0.5);
                acc += std::pow(ur * ur + uc * uc + f0_sq, -11.0 / 6.0);
            }
        }
        return coeff * acc / static_cast<double>(m * m);
    };

    CounterRng rng(seed);
    std::vector<cplx> spectrum(static_cast<std::size_t>(n) * n);
    for (int k1 = 0; k1 < n; ++k1) {
        const int s1 = k1 <= n / 2 ? k1 : k1 - n;
        const double f1 = static_cast<double>(s1) * df;
        for (int k2 = 0; k2 < n; ++k2) {
            const int s2 = k2 <= n / 2 ? k2 : k2 - n;
            const double f2 = static_cast<double>(s2) * df;
            const std::size_t idx = static_cast<std::size_t>(k1) * n + k2;
            if (k1 == 0 && k2 == 0) {
                spectrum[idx] = cplx(0.0, 0.0);
                continue;
            }
            const int m = (std::abs(s1) <= 4 && std::abs(s2) <= 4) ? 16 : 1;
            const double psd = cell_psd(f1, f2, df, m);
            const double amp = std::sqrt(psd) * df;
            const double a = rng.normal(2 * idx);
            const double b = rng.normal(2 * idx + 1);
            spectrum[idx] = cplx(a * amp, b * amp);
        }
    }
    fft2d(spectrum, n, n, +1);  // unnormalized inverse: sum over harmonics

    PhaseScreen screen;
    screen.height = n;
    screen.width = n;
    screen.phase.resize(spectrum.size());
    for (std::size_t i = 0; i < spectrum.size(); ++i) screen.phase[i] = spectrum[i].real();

    // Subharmonic augmentation: the FFT grid carries no power below df, which
    // visibly depresses the structure function already at separations ~n/10.
    // Each level refines the spectral cell around DC with a 3x3 subgrid of
    // plane waves (center cell deferred to the next level).
    const double two_pi = 6.283185307179586476925286766559;
    CounterRng sub(derive_key(seed, 0x73756268ULL));
    std::uint64_t draw = 0;
    for (int level = 1; level <= 3; ++level) {
        const double dfl = df / std::pow(3.0, level);
        for (int i = -1; i <= 1; ++i) {
            for (int j = -1; j <= 1; ++j) {
                const double a = sub.normal(2 * draw);
                const double b = sub.normal(2 * draw + 1);
                ++draw;
                if (i == 0 && j == 0) continue;
                const double fr = static_cast<double>(i) * dfl;
                const double fc = static_cast<double>(j) * dfl;
                const double amp = std::sqrt(cell_psd(fr, fc, dfl, 16)) * dfl;
                for (int r = 0; r < n; ++r) {
                    const double tr = two_pi * fr * static_cast<double>(r);
                    for (int c = 0; c < n; ++c) {
                        const double theta = tr + two_pi * fc * static_cast<double>(c);
                        screen.phase[static_cast<std::size_t>(r) * n + c] +=
                            amp * (a * std::cos(theta) - b * std::sin(theta));
                    }
                }
            }
        }
    }

    double mean = 0.0;
    for (double v : screen.phase) mean += v;
    mean /= static_cast<double>(screen.phase.size());
    for (double& v : screen.phase) v -= mean;
    return screen;
}

// ---------------------------------------------------------------------------
// Degradation

namespace detail {

inline int reflect_index(int i, int n) {
    // edge-inclusive reflection: -1 -> 0, -2 -> 1, n -> n-1, ...
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

inline std::vector<double> gaussian_kernel(double sigma) {
    const int radius = sigma > 0.0 ? static_cast<int>(std::ceil(3.0 * sigma)) : 0;
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = sigma > 0.0 ? std::exp(-0.5 * (i / sigma) * (i / sigma)) : 1.0;
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

inline std::vector<double> separable_blur(const std::vector<double>& src, int h, int w,
                                          const std::vector<double>& kernel) {
    const int radius = static_cast<int>(kernel.size() / 2);
    std::vector<double> rows(src.size()), out(src.size());
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       src[static_cast<std::size_t>(r) * w + reflect_index(c + k, w)];
            rows[static_cast<std::size_t>(r) * w + c] = acc;
        }
    }
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       rows[static_cast<std::size_t>(reflect_index(r + k, h)) * w + c];
            out[static_cast<std::size_t>(r) * w + c] = acc;
        }
    }
    return out;
}

// Sub-pixel translation by (dy, dx), bilinear, zero outside the frame.
inline std::vector<double> bilinear_shift(const std::vector<double>& src, int h, int w, double dy,
                                          double dx) {
    auto sample = [&](int r, int c) -> double {
        if (r < 0 || r >= h || c < 0 || c >= w) return 0.0;
        return src[static_cast<std::size_t>(r) * w + c];
    };
    std::vector<double> out(src.size());
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double sr = static_cast<double>(r) - dy;
            const double sc = static_cast<double>(c) - dx;
            const int r0 = static_cast<int>(std::floor(sr));
            const int c0 = static_cast<int>(std::floor(sc));
            const double fr = sr - r0;
            const double fc = sc - c0;
            out[static_cast<std::size_t>(r) * w + c] =
                (1.0 - fr) * ((1.0 - fc) * sample(r0, c0) + fc * sample(r0, c0 + 1)) +
                fr * ((1.0 - fc) * sample(r0 + 1, c0) + fc * sample(r0 + 1, c0 + 1));
        }
    }
    return out;
}

/// Instantaneous intensity point-spread function of a centered circular
/// aperture (diameter size/2) with the given pupil phase; unit sum.
inline std::vector<double> pupil_psf(const PhaseScreen& screen) {
    const int n = screen.height;
    const double radius = static_cast<double>(n) / 4.0;
    std::vector<cplx> pupil(static_cast<std::size_t>(n) * n, cplx(0.0, 0.0));
    for (int r = 0; r < n; ++r) {
        const double dr = static_cast<double>(r <= n / 2 ? r : r - n);
        for (int c = 0; c < n; ++c) {
            const double dc = static_cast<double>(c <= n / 2 ? c : c - n);
            if (dr * dr + dc * dc <= radius * radius) {
                const double phi = screen.at(r, c);
                pupil[static_cast<std::size_t>(r) * n + c] = cplx(std::cos(phi), std::sin(phi));
            }
        }
    }
    fft2d(pupil, n, n, +1);
    std::vector<double> psf(pupil.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < pupil.size(); ++i) {
        psf[i] = std::norm(pupil[i]);
        sum += psf[i];
    }
    for (double& v : psf) v /= sum;
    return psf;
}

// Cyclic convolution via the transform pair; kernel indexed from the origin.
inline std::vector<double> cyclic_convolve(const std::vector<double>& img, int h, int w,
                                           const std::vector<double>& kernel) {
    std::vector<cplx> fa(img.size()), fb(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        fa[i] = cplx(img[i], 0.0);
        fb[i] = cplx(kernel[i], 0.0);
    }
    fft2d(fa, h, w, -1);
    fft2d(fb, h, w, -1);
    for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
    fft2d(fa, h, w, +1);
    const double scale = 1.0 / (static_cast<double>(h) * static_cast<double>(w));
    std::vector<double> out(img.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fa[i].real() * scale;
    return out;
}

}  // namespace detail

/// Apply the configured turbulence model to an image. Mode none is the
/// identity; gaussian-blur convolves with a normalized Gaussian (reflected
/// boundary) then applies a random sub-pixel tilt; phase-screen convolves
/// with the instantaneous pupil PSF. Output clamped to [0,1].
inline Image degrade(const Image& img, const TurbulenceParams& params, std::uint64_t seed) {
    params.validate();
    if (params.mode == TurbulenceMode::none) return img;

    std::vector<double> field;
    if (params.mode == TurbulenceMode::gaussian_blur) {
        field = params.blur_sigma > 0.0
                    ? detail::separable_blur(img.data, img.height, img.width,
                                             detail::gaussian_kernel(params.blur_sigma))
                    : img.data;
        if (params.tilt_sigma > 0.0) {
            CounterRng rng(seed, 0x746c74ULL);  // tilt stream
            const double dy = params.tilt_sigma * rng.normal(0);
            const double dx = params.tilt_sigma * rng.normal(1);
            field = detail::bilinear_shift(field, img.height, img.width, dy, dx);
        }
    } else {
        if (img.height != img.width)
            throw ConfigError("degrade: phase-screen mode requires a square image");
        const PhaseScreen screen = make_phase_screen(params, img.height, seed);
        field = detail::cyclic_convolve(img.data, img.height, img.width, detail::pupil_psf(screen));
    }

    Image out;
    out.height = img.height;
    out.width = img.width;
    out.data.resize(field.size());
    for (std::size_t i = 0; i < field.size(); ++i)
        out.data[i] = std::clamp(field[i], 0.0, 1.0);
    return out;
}

// ---------------------------------------------------------------------------
// Bucket detection

/// Simulated single-pixel detection: for each pattern the (possibly turbulent)
/// scene is multiplied pixel-wise by the pattern and summed; Gaussian noise of
/// the given sigma is added and the value floored at zero. Per-measurement
/// refresh draws the screen/tilt from sub-seed (seed, i); static reuses the
/// (seed, 0) draw for every measurement.
inline BucketSeries measure(const Image& obj, const PatternStack& patterns,
                            const TurbulenceParams& params, double noise_sigma,
                            std::uint64_t seed) {
    params.validate();
    if (obj.height != patterns.height || obj.width != patterns.width)
        throw ConfigError("measure: object " + std::to_string(obj.height) + "x" +
                          std::to_string(obj.width) + " does not match patterns " +
                          std::to_string(patterns.height) + "x" + std::to_string(patterns.width));
    if (noise_sigma < 0.0) throw ConfigError("measure: noise sigma must be >= 0");

    const bool fresh_each =
        params.mode != TurbulenceMode::none && params.refresh == RefreshPolicy::per_measurement;
    Image static_scene;
    if (!fresh_each) static_scene = degrade(obj, params, derive_key(seed, 0));

    CounterRng noise(derive_key(seed, 0x6e6f697365ULL));  // noise stream
    BucketSeries series;
    series.values.resize(patterns.count);
    const std::size_t plane = patterns.plane_size();
    for (int i = 0; i < patterns.count; ++i) {
        const Image scene_i =
            fresh_each ? degrade(obj, params, derive_key(seed, static_cast<std::uint64_t>(i)))
                       : Image();
        const Image& scene = fresh_each ? scene_i : static_scene;
        const double* pat = patterns.plane(i);
        double acc = 0.0;
        for (std::size_t p = 0; p < plane; ++p) acc += scene.data[p] * pat[p];
        if (noise_sigma > 0.0) acc += noise_sigma * noise.normal(static_cast<std::uint64_t>(i));
        series.values[i] = std::max(0.0, acc);
    }
    return series;
}

}  // namespace ghostforge
