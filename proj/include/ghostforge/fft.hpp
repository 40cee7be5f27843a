#pragma once

#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "ghostforge/errors.hpp"

namespace ghostforge {

// Small fixed-order discrete Fourier transforms for phase screens and point
// spread functions. Grids here are tiny (<= a few hundred per side), so a
// radix-2 in-place FFT with a naive-DFT fallback for non-power-of-two lengths
// is all that is needed. No normalization is applied in either direction:
// forward computes sum x_k exp(-2*pi*i*k*n/N), inverse the +i variant.

using cplx = std::complex<double>;

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline void fft_radix2(cplx* data, std::size_t n, int sign) {
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }
    const double two_pi = 6.283185307179586476925286766559;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * two_pi / static_cast<double>(len);
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cplx u = data[i + k];
                const cplx v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

inline void dft_naive(cplx* data, std::size_t n, int sign) {
    const double two_pi = 6.283185307179586476925286766559;
    std::vector<cplx> out(n, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t m = 0; m < n; ++m) {
            const double ang = sign * two_pi * static_cast<double>(k * m % n) / static_cast<double>(n);
            out[k] += data[m] * cplx(std::cos(ang), std::sin(ang));
        }
    }
    for (std::size_t i = 0; i < n; ++i) data[i] = out[i];
}

inline void transform_1d(cplx* data, std::size_t n, int sign) {
    if (n == 1) return;
    if (is_pow2(n))
        fft_radix2(data, n, sign);
    else
        dft_naive(data, n, sign);
}

}  // namespace detail

/// In-place 2-D DFT over a row-major h x w grid. sign = -1 forward, +1 inverse.
/// Unnormalized in both directions.
inline void fft2d(std::vector<cplx>& grid, int h, int w, int sign) {
    if (grid.size() != static_cast<std::size_t>(h) * w)
        throw ConfigError("fft2d: grid size does not match dimensions");
    for (int r = 0; r < h; ++r) detail::transform_1d(grid.data() + static_cast<std::size_t>(r) * w, w, sign);
    std::vector<cplx> col(h);
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) col[r] = grid[static_cast<std::size_t>(r) * w + c];
        detail::transform_1d(col.data(), h, sign);
        for (int r = 0; r < h; ++r) grid[static_cast<std::size_t>(r) * w + c] = col[r];
    }
}

}  // namespace ghostforge
