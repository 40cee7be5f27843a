#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "ghostforge/tensor.hpp"

namespace ghostforge {

// The layer vocabulary of the restoration network. Every op records its
// backward on the active tape; reductions run in a fixed order so repeated
// runs are bit-identical.

namespace detail {

inline std::size_t offset4(const Shape& s, int n, int c, int h, int w) {
    return ((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w;
}

[[noreturn]] inline void shape_fail(const char* op, const std::string& detail_msg) {
    throw ConfigError(std::string(op) + ": " + detail_msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution

/// 2-D cross-correlation with stride/dilation/zero-padding.
/// x: (N, Cin, H, W); w: (Cout, Cin, kh, kw); b: (1, Cout, 1, 1).
/// Output spatial size: floor((in + 2*pad - dilation*(k-1) - 1)/stride) + 1.
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride = 1,
                     int dilation = 1, int padding = 0) {
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (stride < 1 || dilation < 1 || padding < 0)
        detail::shape_fail("conv2d", "stride/dilation must be >= 1 and padding >= 0");
    if (ws.c != xs.c)
        detail::shape_fail("conv2d", "input channels " + std::to_string(xs.c) +
                                         " do not match kernel channels " + std::to_string(ws.c));
    if (b.shape().n != 1 || b.shape().c != ws.n || b.shape().h != 1 || b.shape().w != 1)
        detail::shape_fail("conv2d", "bias shape " + b.shape().str() + " must be (1," +
                                         std::to_string(ws.n) + ",1,1)");
    const int eh = dilation * (ws.h - 1) + 1;
    const int ew = dilation * (ws.w - 1) + 1;
    const int oh = (xs.h + 2 * padding - eh) / stride + 1;
    const int ow = (xs.w + 2 * padding - ew) / stride + 1;
    if (xs.h + 2 * padding < eh || xs.w + 2 * padding < ew || oh < 1 || ow < 1)
        detail::shape_fail("conv2d", "effective kernel " + std::to_string(eh) + "x" +
                                         std::to_string(ew) + " exceeds padded input " +
                                         std::to_string(xs.h + 2 * padding) + "x" +
                                         std::to_string(xs.w + 2 * padding));

    const Shape os{xs.n, ws.n, oh, ow};
    std::vector<double> out(os.numel());
    const std::vector<double>& xv = x.data();
    const std::vector<double>& wv = w.data();
    const std::vector<double>& bv = b.data();

    for (int n = 0; n < os.n; ++n) {
        for (int co = 0; co < os.c; ++co) {
            double* dst = out.data() + detail::offset4(os, n, co, 0, 0);
            const double bias = bv[static_cast<std::size_t>(co)];
            for (int i = 0; i < oh * ow; ++i) dst[i] = bias;
            for (int ci = 0; ci < xs.c; ++ci) {
                const double* src = xv.data() + detail::offset4(xs, n, ci, 0, 0);
                for (int kr = 0; kr < ws.h; ++kr) {
                    for (int kc = 0; kc < ws.w; ++kc) {
                        const double wk = wv[detail::offset4(ws, co, ci, kr, kc)];
                        if (wk == 0.0) continue;
                        for (int r = 0; r < oh; ++r) {
                            const int ir = r * stride - padding + kr * dilation;
                            if (ir < 0 || ir >= xs.h) continue;
                            const double* row = src + static_cast<std::size_t>(ir) * xs.w;
                            double* orow = dst + static_cast<std::size_t>(r) * ow;
                            for (int c = 0; c < ow; ++c) {
                                const int ic = c * stride - padding + kc * dilation;
                                if (ic < 0 || ic >= xs.w) continue;
                                orow[c] += wk * row[ic];
                            }
                        }
                    }
                }
            }
        }
    }

    detail::NodePtr xn = x.node(), wn = w.node(), bn = b.node();
    return detail::make_op(
        "conv2d", os, std::move(out), {xn, wn, bn},
        [xn, wn, bn, stride, dilation, padding, os](detail::TensorNode& self) {
            const Shape xs = xn->shape;
            const Shape ws = wn->shape;
            const bool want_x = xn->requires_grad;
            const bool want_w = wn->requires_grad;
            const bool want_b = bn->requires_grad;
            if (want_x) xn->ensure_grad();
            if (want_w) wn->ensure_grad();
            if (want_b) bn->ensure_grad();
            for (int n = 0; n < os.n; ++n) {
                for (int co = 0; co < os.c; ++co) {
                    const double* g = self.grad.data() + detail::offset4(os, n, co, 0, 0);
                    if (want_b) {
                        double acc = 0.0;
                        for (int i = 0; i < os.h * os.w; ++i) acc += g[i];
                        bn->grad[static_cast<std::size_t>(co)] += acc;
                    }
                    for (int ci = 0; ci < xs.c; ++ci) {
                        const double* src = xn->value.data() + detail::offset4(xs, n, ci, 0, 0);
                        double* dsrc = want_x ? xn->grad.data() + detail::offset4(xs, n, ci, 0, 0)
                                              : nullptr;
                        for (int kr = 0; kr < ws.h; ++kr) {
                            for (int kc = 0; kc < ws.w; ++kc) {
                                const std::size_t widx = detail::offset4(ws, co, ci, kr, kc);
                                const double wk = wn->value[widx];
                                double wacc = 0.0;
                                for (int r = 0; r < os.h; ++r) {
                                    const int ir = r * stride - padding + kr * dilation;
                                    if (ir < 0 || ir >= xs.h) continue;
                                    const double* grow = g + static_cast<std::size_t>(r) * os.w;
                                    const double* srow = src + static_cast<std::size_t>(ir) * xs.w;
                                    double* drow =
                                        want_x ? dsrc + static_cast<std::size_t>(ir) * xs.w : nullptr;
                                    for (int c = 0; c < os.w; ++c) {
                                        const int ic = c * stride - padding + kc * dilation;
                                        if (ic < 0 || ic >= xs.w) continue;
                                        const double gv = grow[c];
                                        if (want_w) wacc += gv * srow[ic];
                                        if (want_x) drow[ic] += gv * wk;
                                    }
                                }
                                if (want_w) wn->grad[widx] += wacc;
                            }
                        }
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Pooling and resampling

/// Spatial mean per channel: (N, C, H, W) -> (N, C, 1, 1).
inline Tensor global_avg_pool(const Tensor& x) {
    const Shape& xs = x.shape();
    const Shape os{xs.n, xs.c, 1, 1};
    const double inv = 1.0 / (static_cast<double>(xs.h) * static_cast<double>(xs.w));
    std::vector<double> out(os.numel());
    const std::vector<double>& xv = x.data();
    const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double* src = xv.data() + k * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += src[i];
        out[k] = acc * inv;
    }
    detail::NodePtr xn = x.node();
    return detail::make_op("global_avg_pool", os, std::move(out), {xn},
                           [xn, plane, inv](detail::TensorNode& self) {
                               if (!xn->requires_grad) return;
                               xn->ensure_grad();
                               for (std::size_t k = 0; k < self.grad.size(); ++k) {
                                   const double g = self.grad[k] * inv;
                                   double* dst = xn->grad.data() + k * plane;
                                   for (std::size_t i = 0; i < plane; ++i) dst[i] += g;
                               }
                           });
}

/// 2x2 max pooling with stride 2; requires even spatial dims. Ties resolve to
/// the first element in scan order.
inline Tensor maxpool2(const Tensor& x) {
    const Shape& xs = x.shape();
    if (xs.h % 2 != 0 || xs.w % 2 != 0)
        detail::shape_fail("maxpool2", "spatial dims must be even, got " + xs.str());
    const Shape os{xs.n, xs.c, xs.h / 2, xs.w / 2};
    std::vector<double> out(os.numel());
    auto arg = std::make_shared<std::vector<std::size_t>>(os.numel());
    const std::vector<double>& xv = x.data();
    std::size_t o = 0;
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            for (int r = 0; r < os.h; ++r) {
                for (int q = 0; q < os.w; ++q, ++o) {
                    std::size_t best = detail::offset4(xs, n, c, 2 * r, 2 * q);
                    double bv = xv[best];
                    const std::size_t cand[3] = {detail::offset4(xs, n, c, 2 * r, 2 * q + 1),
                                                 detail::offset4(xs, n, c, 2 * r + 1, 2 * q),
                                                 detail::offset4(xs, n, c, 2 * r + 1, 2 * q + 1)};
                    for (std::size_t idx : cand) {
                        if (xv[idx] > bv) {
                            bv = xv[idx];
                            best = idx;
                        }
                    }
                    out[o] = bv;
                    (*arg)[o] = best;
                }
            }
        }
    }
    detail::NodePtr xn = x.node();
    return detail::make_op("maxpool2", os, std::move(out), {xn},
                           [xn, arg](detail::TensorNode& self) {
                               if (!xn->requires_grad) return;
                               xn->ensure_grad();
                               for (std::size_t i = 0; i < self.grad.size(); ++i)
                                   xn->grad[(*arg)[i]] += self.grad[i];
                           });
}

/// Nearest-neighbour upsampling by an integer factor.
inline Tensor upsample_nearest(const Tensor& x, int factor) {
    if (factor < 1) detail::shape_fail("upsample_nearest", "factor must be >= 1");
    if (factor == 1) return x;
    const Shape& xs = x.shape();
    const Shape os{xs.n, xs.c, xs.h * factor, xs.w * factor};
    std::vector<double> out(os.numel());
    const std::vector<double>& xv = x.data();
    for (int n = 0; n < os.n; ++n)
        for (int c = 0; c < os.c; ++c)
            for (int r = 0; r < os.h; ++r) {
                const double* srow = xv.data() + detail::offset4(xs, n, c, r / factor, 0);
                double* drow = out.data() + detail::offset4(os, n, c, r, 0);
                for (int q = 0; q < os.w; ++q) drow[q] = srow[q / factor];
            }
    detail::NodePtr xn = x.node();
    return detail::make_op("upsample_nearest", os, std::move(out), {xn},
                           [xn, factor, os](detail::TensorNode& self) {
                               if (!xn->requires_grad) return;
                               xn->ensure_grad();
                               const Shape xs = xn->shape;
                               for (int n = 0; n < os.n; ++n)
                                   for (int c = 0; c < os.c; ++c)
                                       for (int r = 0; r < os.h; ++r) {
                                           const double* grow =
                                               self.grad.data() + detail::offset4(os, n, c, r, 0);
                                           double* drow = xn->grad.data() +
                                                          detail::offset4(xs, n, c, r / factor, 0);
                                           for (int q = 0; q < os.w; ++q)
                                               drow[q / factor] += grow[q];
                                       }
                           });
}

// ---------------------------------------------------------------------------
// Elementwise activations

namespace detail {

template <typename Fwd, typename Bwd>
Tensor elementwise(const char* op, const Tensor& x, Fwd fwd, Bwd bwd) {
    std::vector<double> out(x.numel());
    const std::vector<double>& xv = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
    detail::NodePtr xn = x.node();
    return detail::make_op(op, x.shape(), std::move(out), {xn},
                           [xn, bwd](detail::TensorNode& self) {
                               if (!xn->requires_grad) return;
                               xn->ensure_grad();
                               for (std::size_t i = 0; i < self.grad.size(); ++i)
                                   xn->grad[i] += self.grad[i] * bwd(xn->value[i], self.value[i]);
                           });
}

inline double sigmoid_value(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

}  // namespace detail

/// max(x, 0); the derivative at exactly 0 is fixed to 0.
inline Tensor relu(const Tensor& x) {
    return detail::elementwise(
        "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor leaky_relu(const Tensor& x, double slope = 0.2) {
    return detail::elementwise(
        "leaky_relu", x, [slope](double v) { return v > 0.0 ? v : slope * v; },
        [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

inline Tensor sigmoid(const Tensor& x) {
    return detail::elementwise(
        "sigmoid", x, [](double v) { return detail::sigmoid_value(v); },
        [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& x) {
    return detail::elementwise(
        "tanh", x, [](double v) { return std::tanh(v); },
        [](double, double y) { return 1.0 - y * y; });
}

// ---------------------------------------------------------------------------
// Structure ops

/// Elementwise sum of two same-shape tensors.
inline Tensor add(const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape()))
        detail::shape_fail("add", a.shape().str() + " vs " + b.shape().str());
    std::vector<double> out(a.numel());
    const std::vector<double>& av = a.data();
    const std::vector<double>& bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    detail::NodePtr an = a.node(), bn = b.node();
    return detail::make_op("add", a.shape(), std::move(out), {an, bn},
                           [an, bn](detail::TensorNode& self) {
                               if (an->requires_grad) {
                                   an->ensure_grad();
                                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                                       an->grad[i] += self.grad[i];
                               }
                               if (bn->requires_grad) {
                                   bn->ensure_grad();
                                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                                       bn->grad[i] += self.grad[i];
                               }
                           });
}

/// Multiply by a compile-time constant factor.
inline Tensor scale(const Tensor& x, double factor) {
    std::vector<double> out(x.numel());
    const std::vector<double>& xv = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor;
    detail::NodePtr xn = x.node();
    return detail::make_op("scale", x.shape(), std::move(out), {xn},
                           [xn, factor](detail::TensorNode& self) {
                               if (!xn->requires_grad) return;
                               xn->ensure_grad();
                               for (std::size_t i = 0; i < self.grad.size(); ++i)
                                   xn->grad[i] += self.grad[i] * factor;
                           });
}

/// Channel-wise gating: x (N,C,H,W) scaled by r (N,C,1,1).
inline Tensor scale_channels(const Tensor& x, const Tensor& r) {
    const Shape& xs = x.shape();
    const Shape& rs = r.shape();
    if (rs.n != xs.n || rs.c != xs.c || rs.h != 1 || rs.w != 1)
        detail::shape_fail("scale_channels",
                           "weights " + rs.str() + " must be (" + std::to_string(xs.n) + "," +
                               std::to_string(xs.c) + ",1,1) for input " + xs.str());
    const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
    std::vector<double> out(x.numel());
    const std::vector<double>& xv = x.data();
    const std::vector<double>& rv = r.data();
    for (std::size_t k = 0; k < rv.size(); ++k) {
        const double g = rv[k];
        const double* src = xv.data() + k * plane;
        double* dst = out.data() + k * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * g;
    }
    detail::NodePtr xn = x.node(), rn = r.node();
    return detail::make_op(
        "scale_channels", xs, std::move(out), {xn, rn},
        [xn, rn, plane](detail::TensorNode& self) {
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (std::size_t k = 0; k < rn->value.size(); ++k) {
                    const double g = rn->value[k];
                    const double* gs = self.grad.data() + k * plane;
                    double* dst = xn->grad.data() + k * plane;
                    for (std::size_t i = 0; i < plane; ++i) dst[i] += gs[i] * g;
                }
            }
            if (rn->requires_grad) {
                rn->ensure_grad();
                for (std::size_t k = 0; k < rn->value.size(); ++k) {
                    const double* gs = self.grad.data() + k * plane;
                    const double* src = xn->value.data() + k * plane;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < plane; ++i) acc += gs[i] * src[i];
                    rn->grad[k] += acc;
                }
            }
        });
}

/// Per-site gating: x (N,C,H,W) scaled by m (N,1,H,W) across all channels.
inline Tensor scale_spatial(const Tensor& x, const Tensor& m) {
    const Shape& xs = x.shape();
    const Shape& ms = m.shape();
    if (ms.n != xs.n || ms.c != 1 || ms.h != xs.h || ms.w != xs.w)
        detail::shape_fail("scale_spatial", "weights " + ms.str() + " must be (" +
                                                std::to_string(xs.n) + ",1," +
                                                std::to_string(xs.h) + "," +
                                                std::to_string(xs.w) + ") for input " + xs.str());
    const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
    std::vector<double> out(x.numel());
    const std::vector<double>& xv = x.data();
    const std::vector<double>& mv = m.data();
    for (int n = 0; n < xs.n; ++n) {
        const double* mask = mv.data() + static_cast<std::size_t>(n) * plane;
        for (int c = 0; c < xs.c; ++c) {
            const std::size_t base = detail::offset4(xs, n, c, 0, 0);
            for (std::size_t i = 0; i < plane; ++i) out[base + i] = xv[base + i] * mask[i];
        }
    }
    detail::NodePtr xn = x.node(), mn = m.node();
    return detail::make_op(
        "scale_spatial", xs, std::move(out), {xn, mn},
        [xn, mn, plane](detail::TensorNode& self) {
            const Shape xs = xn->shape;
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (int n = 0; n < xs.n; ++n) {
                    const double* mask = mn->value.data() + static_cast<std::size_t>(n) * plane;
                    for (int c = 0; c < xs.c; ++c) {
                        const std::size_t base = detail::offset4(xs, n, c, 0, 0);
                        for (std::size_t i = 0; i < plane; ++i)
                            xn->grad[base + i] += self.grad[base + i] * mask[i];
                    }
                }
            }
            if (mn->requires_grad) {
                mn->ensure_grad();
                for (int n = 0; n < xs.n; ++n) {
                    double* dmask = mn->grad.data() + static_cast<std::size_t>(n) * plane;
                    for (int c = 0; c < xs.c; ++c) {
                        const std::size_t base = detail::offset4(xs, n, c, 0, 0);
                        for (std::size_t i = 0; i < plane; ++i)
                            dmask[i] += self.grad[base + i] * xn->value[base + i];
                    }
                }
            }
        });
}

/// Concatenate along the channel axis.
inline Tensor concat_channels(const std::vector<Tensor>& xs) {
    if (xs.empty()) detail::shape_fail("concat_channels", "no inputs");
    const Shape& first = xs.front().shape();
    int total_c = 0;
    for (const Tensor& t : xs) {
        const Shape& s = t.shape();
        if (s.n != first.n || s.h != first.h || s.w != first.w)
            detail::shape_fail("concat_channels",
                               "mismatched dims " + s.str() + " vs " + first.str());
        total_c += s.c;
    }
    const Shape os{first.n, total_c, first.h, first.w};
    const std::size_t plane = static_cast<std::size_t>(first.h) * first.w;
    std::vector<double> out(os.numel());
    std::vector<detail::NodePtr> parents;
    parents.reserve(xs.size());
    for (const Tensor& t : xs) parents.push_back(t.node());

    for (int n = 0; n < os.n; ++n) {
        int co = 0;
        for (const Tensor& t : xs) {
            const Shape& s = t.shape();
            const double* src = t.data().data() + detail::offset4(s, n, 0, 0, 0);
            double* dst = out.data() + detail::offset4(os, n, co, 0, 0);
            std::copy(src, src + static_cast<std::size_t>(s.c) * plane, dst);
            co += s.c;
        }
    }
    auto parts = std::make_shared<std::vector<detail::NodePtr>>(parents);
    return detail::make_op(
        "concat_channels", os, std::move(out), std::move(parents),
        [parts, os, plane](detail::TensorNode& self) {
            for (int n = 0; n < os.n; ++n) {
                int co = 0;
                for (const auto& p : *parts) {
                    const Shape& s = p->shape;
                    if (p->requires_grad) {
                        p->ensure_grad();
                        const double* g = self.grad.data() + detail::offset4(os, n, co, 0, 0);
                        double* dst = p->grad.data() + detail::offset4(s, n, 0, 0, 0);
                        for (std::size_t i = 0; i < static_cast<std::size_t>(s.c) * plane; ++i)
                            dst[i] += g[i];
                    }
                    co += s.c;
                }
            }
        });
}

/// Normalizes k same-shape tensors against each other: at every element site
/// the k outputs are softmax(x_1..x_k) and sum to 1.
inline std::vector<Tensor> softmax_over(const std::vector<Tensor>& xs) {
    const std::size_t k = xs.size();
    if (k < 2) detail::shape_fail("softmax_over", "need at least 2 inputs");
    const Shape& shape = xs.front().shape();
    for (const Tensor& t : xs)
        if (!(t.shape() == shape))
            detail::shape_fail("softmax_over",
                               "mismatched shapes " + t.shape().str() + " vs " + shape.str());
    const std::size_t m = shape.numel();

    auto values = std::make_shared<std::vector<std::vector<double>>>(k);
    {
        std::vector<double> peak(m, -std::numeric_limits<double>::infinity());
        for (const Tensor& t : xs)
            for (std::size_t i = 0; i < m; ++i) peak[i] = std::max(peak[i], t.data()[i]);
        std::vector<double> denom(m, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            (*values)[j].resize(m);
            for (std::size_t i = 0; i < m; ++i) {
                const double e = std::exp(xs[j].data()[i] - peak[i]);
                (*values)[j][i] = e;
                denom[i] += e;
            }
        }
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t i = 0; i < m; ++i) (*values)[j][i] /= denom[i];
    }

    std::vector<detail::NodePtr> parents;
    parents.reserve(k);
    for (const Tensor& t : xs) parents.push_back(t.node());
    auto parts = std::make_shared<std::vector<detail::NodePtr>>(parents);

    std::vector<Tensor> out;
    out.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        // Output j contributes g_j * y_j * (delta_ij - y_i) to input i; summed
        // over outputs this reassembles the full softmax Jacobian.
        out.push_back(detail::make_op(
            "softmax_over", shape, std::vector<double>((*values)[j]), parents,
            [parts, values, j, m](detail::TensorNode& self) {
                for (std::size_t i = 0; i < parts->size(); ++i) {
                    const auto& p = (*parts)[i];
                    if (!p->requires_grad) continue;
                    p->ensure_grad();
                    const std::vector<double>& yj = (*values)[j];
                    const std::vector<double>& yi = (*values)[i];
                    if (i == j) {
                        for (std::size_t t = 0; t < m; ++t)
                            p->grad[t] += self.grad[t] * yj[t] * (1.0 - yj[t]);
                    } else {
                        for (std::size_t t = 0; t < m; ++t)
                            p->grad[t] -= self.grad[t] * yj[t] * yi[t];
                    }
                }
            }));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions

/// Mean squared difference over all elements: (1/numel) * sum (a - b)^2.
inline Tensor mse(const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape()))
        detail::shape_fail("mse", a.shape().str() + " vs " + b.shape().str());
    const std::vector<double>& av = a.data();
    const std::vector<double>& bv = b.data();
    const double inv = 1.0 / static_cast<double>(a.numel());
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double d = av[i] - bv[i];
        acc += d * d;
    }
    detail::NodePtr an = a.node(), bn = b.node();
    return detail::make_op(
        "mse", Shape{1, 1, 1, 1}, {acc * inv}, {an, bn},
        [an, bn, inv](detail::TensorNode& self) {
            const double g = self.grad[0] * 2.0 * inv;
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < an->value.size(); ++i)
                    an->grad[i] += g * (an->value[i] - bn->value[i]);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < bn->value.size(); ++i)
                    bn->grad[i] -= g * (an->value[i] - bn->value[i]);
            }
        });
}

/// Mean of squares: (1/numel) * sum a^2.
inline Tensor mean_square(const Tensor& a) {
    const std::vector<double>& av = a.data();
    const double inv = 1.0 / static_cast<double>(a.numel());
    double acc = 0.0;
    for (double v : av) acc += v * v;
    detail::NodePtr an = a.node();
    return detail::make_op("mean_square", Shape{1, 1, 1, 1}, {acc * inv}, {an},
                           [an, inv](detail::TensorNode& self) {
                               if (!an->requires_grad) return;
                               an->ensure_grad();
                               const double g = self.grad[0] * 2.0 * inv;
                               for (std::size_t i = 0; i < an->value.size(); ++i)
                                   an->grad[i] += g * an->value[i];
                           });
}

/// Sum of all elements.
inline Tensor sum(const Tensor& a) {
    const std::vector<double>& av = a.data();
    double acc = 0.0;
    for (double v : av) acc += v;
    detail::NodePtr an = a.node();
    return detail::make_op("sum", Shape{1, 1, 1, 1}, {acc}, {an},
                           [an](detail::TensorNode& self) {
                               if (!an->requires_grad) return;
                               an->ensure_grad();
                               for (std::size_t i = 0; i < an->value.size(); ++i)
                                   an->grad[i] += self.grad[0];
                           });
}

}  // namespace ghostforge
