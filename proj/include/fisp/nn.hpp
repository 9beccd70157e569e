#pragma once

#include <Eigen/Core>

#include "fisp/autodiff.hpp"
#include "fisp/fourier.hpp"

namespace fisp::ad {

namespace detail {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

// im2col for one sample: rows = Cin*kh*kw, cols = Ho*Wo, zero padding.
inline void im2col(const Tensor& x, std::int64_t n, int kh, int kw, int stride, int pad,
                   std::int64_t ho, std::int64_t wo, std::vector<double>& col) {
    const std::int64_t rows = x.c * kh * kw;
    col.assign(static_cast<std::size_t>(rows * ho * wo), 0.0);
    for (std::int64_t ci = 0; ci < x.c; ++ci) {
        const double* src = x.plane(n, ci);
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                double* dst = col.data() + static_cast<std::size_t>(((ci * kh + ky) * kw + kx) * ho * wo);
                for (std::int64_t oy = 0; oy < ho; ++oy) {
                    const std::int64_t iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= x.h) continue;
                    const double* srow = src + iy * x.w;
                    double* drow = dst + oy * wo;
                    for (std::int64_t ox = 0; ox < wo; ++ox) {
                        const std::int64_t ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < x.w) drow[ox] = srow[ix];
                    }
                }
            }
        }
    }
}

inline void col2im_add(const std::vector<double>& col, Tensor& gx, std::int64_t n, int kh, int kw,
                       int stride, int pad, std::int64_t ho, std::int64_t wo) {
    for (std::int64_t ci = 0; ci < gx.c; ++ci) {
        double* dst = gx.plane(n, ci);
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                const double* src =
                    col.data() + static_cast<std::size_t>(((ci * kh + ky) * kw + kx) * ho * wo);
                for (std::int64_t oy = 0; oy < ho; ++oy) {
                    const std::int64_t iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= gx.h) continue;
                    double* drow = dst + iy * gx.w;
                    const double* srow = src + oy * wo;
                    for (std::int64_t ox = 0; ox < wo; ++ox) {
                        const std::int64_t ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < gx.w) drow[ix] += srow[ox];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// 2D convolution, zero padding. weight (Cout,Cin,kh,kw), optional bias
// (1,Cout,1,1). The im2col matrix is rebuilt in the backward pass rather
// than cached; graphs here are small and memory is the scarcer resource.
inline Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride = 1, int pad = -1) {
    const Tensor& xv = x->val;
    const Tensor& wv = weight->val;
    if (xv.c != wv.c)
        throw DimensionError("conv2d: input channels " + std::to_string(xv.c) +
                             " != weight channels " + std::to_string(wv.c));
    const int kh = static_cast<int>(wv.h), kw = static_cast<int>(wv.w);
    if (pad < 0) pad = kh / 2;  // 'same' for odd kernels at stride 1
    const std::int64_t ho = (xv.h + 2 * pad - kh) / stride + 1;
    const std::int64_t wo = (xv.w + 2 * pad - kw) / stride + 1;
    if (ho < 1 || wo < 1) throw DimensionError("conv2d: output would be empty");

    Tensor out(xv.n, wv.n, ho, wo);
    const std::int64_t ckk = wv.c * kh * kw;
    std::vector<double> col;
    detail::CMapRM wmat(wv.v.data(), wv.n, ckk);
    for (std::int64_t n = 0; n < xv.n; ++n) {
        detail::im2col(xv, n, kh, kw, stride, pad, ho, wo, col);
        detail::CMapRM cmat(col.data(), ckk, ho * wo);
        detail::MapRM omat(out.plane(n, 0), wv.n, ho * wo);
        omat.noalias() = wmat * cmat;
    }
    if (bias) {
        if (bias->val.c != wv.n) throw DimensionError("conv2d: bias/weight channel mismatch");
        for (std::int64_t n = 0; n < out.n; ++n)
            for (std::int64_t ci = 0; ci < out.c; ++ci) {
                const double b = bias->val.v[static_cast<std::size_t>(ci)];
                double* p = out.plane(n, ci);
                for (std::int64_t i = 0; i < ho * wo; ++i) p[i] += b;
            }
    }

    std::vector<Var> parents = bias ? std::vector<Var>{x, weight, bias}
                                    : std::vector<Var>{x, weight};
    Var node = detail::make_node(std::move(out), std::move(parents));
    if (node->needs) {
        Node* np = node.get();
        Node* xp = x.get();
        Node* wp = weight.get();
        Node* bp = bias ? bias.get() : nullptr;
        node->back = [np, xp, wp, bp, kh, kw, stride, pad, ho, wo, ckk] {
            const Tensor& g = np->grad;
            std::vector<double> col, gcol;
            detail::CMapRM wmat(wp->val.v.data(), wp->val.n, ckk);
            for (std::int64_t n = 0; n < g.n; ++n) {
                detail::CMapRM gmat(g.plane(n, 0), g.c, ho * wo);
                if (wp->needs) {
                    detail::im2col(xp->val, n, kh, kw, stride, pad, ho, wo, col);
                    detail::CMapRM cmat(col.data(), ckk, ho * wo);
                    detail::MapRM gw(wp->grad_buf().v.data(), wp->val.n, ckk);
                    gw.noalias() += gmat * cmat.transpose();
                }
                if (xp->needs) {
                    gcol.assign(static_cast<std::size_t>(ckk * ho * wo), 0.0);
                    detail::MapRM gc(gcol.data(), ckk, ho * wo);
                    gc.noalias() = wmat.transpose() * gmat;
                    detail::col2im_add(gcol, xp->grad_buf(), n, kh, kw, stride, pad, ho, wo);
                }
                if (bp && bp->needs) {
                    Tensor& gb = bp->grad_buf();
                    for (std::int64_t ci = 0; ci < g.c; ++ci) {
                        const double* p = g.plane(n, ci);
                        double s = 0.0;
                        for (std::int64_t i = 0; i < ho * wo; ++i) s += p[i];
                        gb.v[static_cast<std::size_t>(ci)] += s;
                    }
                }
            }
        };
    }
    return node;
}

// Per-(sample, channel) normalization over H*W with per-channel affine.
inline Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5) {
    const Tensor& xv = x->val;
    if (gamma->val.c != xv.c || beta->val.c != xv.c)
        throw DimensionError("instance_norm: affine parameter channel mismatch");
    const std::int64_t m = xv.h * xv.w;
    Tensor out(xv.n, xv.c, xv.h, xv.w);
    auto xhat = std::make_shared<Tensor>(xv.n, xv.c, xv.h, xv.w);
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(xv.n * xv.c));
    for (std::int64_t n = 0; n < xv.n; ++n) {
        for (std::int64_t ci = 0; ci < xv.c; ++ci) {
            const double* src = xv.plane(n, ci);
            double mu = 0.0;
            for (std::int64_t i = 0; i < m; ++i) mu += src[i];
            mu /= static_cast<double>(m);
            double var = 0.0;
            for (std::int64_t i = 0; i < m; ++i) var += (src[i] - mu) * (src[i] - mu);
            var /= static_cast<double>(m);
            const double is = 1.0 / std::sqrt(var + eps);
            (*inv_std)[static_cast<std::size_t>(n * xv.c + ci)] = is;
            const double gm = gamma->val.v[static_cast<std::size_t>(ci)];
            const double bt = beta->val.v[static_cast<std::size_t>(ci)];
            double* xh = xhat->plane(n, ci);
            double* dst = out.plane(n, ci);
            for (std::int64_t i = 0; i < m; ++i) {
                xh[i] = (src[i] - mu) * is;
                dst[i] = gm * xh[i] + bt;
            }
        }
    }
    Var node = detail::make_node(std::move(out), {x, gamma, beta});
    if (node->needs) {
        Node* np = node.get();
        Node* xp = x.get();
        Node* gp = gamma.get();
        Node* bp = beta.get();
        node->back = [np, xp, gp, bp, xhat, inv_std, m] {
            const Tensor& g = np->grad;
            for (std::int64_t n = 0; n < g.n; ++n) {
                for (std::int64_t ci = 0; ci < g.c; ++ci) {
                    const double* gi = g.plane(n, ci);
                    const double* xh = xhat->plane(n, ci);
                    double gsum = 0.0, gxsum = 0.0;
                    for (std::int64_t i = 0; i < m; ++i) {
                        gsum += gi[i];
                        gxsum += gi[i] * xh[i];
                    }
                    if (gp->needs) gp->grad_buf().v[static_cast<std::size_t>(ci)] += gxsum;
                    if (bp->needs) bp->grad_buf().v[static_cast<std::size_t>(ci)] += gsum;
                    if (xp->needs) {
                        const double gm = gp->val.v[static_cast<std::size_t>(ci)];
                        const double is = (*inv_std)[static_cast<std::size_t>(n * g.c + ci)];
                        const double mg = gsum / static_cast<double>(m);
                        const double mgx = gxsum / static_cast<double>(m);
                        double* gx = xp->grad_buf().plane(n, ci);
                        for (std::int64_t i = 0; i < m; ++i)
                            gx[i] += gm * is * (gi[i] - mg - xh[i] * mgx);
                    }
                }
            }
        };
    }
    return node;
}

// Depth-to-space, factor 2: (N, 4C, H, W) -> (N, C, 2H, 2W).
// Input channel c*4 + dy*2 + dx lands at spatial offset (dy, dx).
inline Var pixel_shuffle2(const Var& x) {
    const Tensor& xv = x->val;
    if (xv.c % 4 != 0) throw DimensionError("pixel_shuffle2: channels must be divisible by 4");
    Tensor out(xv.n, xv.c / 4, xv.h * 2, xv.w * 2);
    for (std::int64_t n = 0; n < xv.n; ++n)
        for (std::int64_t co = 0; co < out.c; ++co)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    const double* src = xv.plane(n, co * 4 + dy * 2 + dx);
                    for (std::int64_t yy = 0; yy < xv.h; ++yy)
                        for (std::int64_t xx = 0; xx < xv.w; ++xx)
                            out.at(n, co, 2 * yy + dy, 2 * xx + dx) = src[yy * xv.w + xx];
                }
    Var node = detail::make_node(std::move(out), {x});
    if (node->needs) {
        Node* np = node.get();
        Node* xp = x.get();
        node->back = [np, xp] {
            const Tensor& g = np->grad;
            Tensor& gx = xp->grad_buf();
            for (std::int64_t n = 0; n < gx.n; ++n)
                for (std::int64_t co = 0; co < g.c; ++co)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            double* dst = gx.plane(n, co * 4 + dy * 2 + dx);
                            for (std::int64_t yy = 0; yy < gx.h; ++yy)
                                for (std::int64_t xx = 0; xx < gx.w; ++xx)
                                    dst[yy * gx.w + xx] += g.at(n, co, 2 * yy + dy, 2 * xx + dx);
                        }
        };
    }
    return node;
}

inline Var upsample_nearest2(const Var& x) {
    const Tensor& xv = x->val;
    Tensor out(xv.n, xv.c, xv.h * 2, xv.w * 2);
    for (std::int64_t n = 0; n < xv.n; ++n)
        for (std::int64_t ci = 0; ci < xv.c; ++ci) {
            const double* src = xv.plane(n, ci);
            double* dst = out.plane(n, ci);
            for (std::int64_t y = 0; y < out.h; ++y)
                for (std::int64_t xx = 0; xx < out.w; ++xx)
                    dst[y * out.w + xx] = src[(y / 2) * xv.w + (xx / 2)];
        }
    Var node = detail::make_node(std::move(out), {x});
    if (node->needs) {
        Node* np = node.get();
        Node* xp = x.get();
        node->back = [np, xp] {
            const Tensor& g = np->grad;
            Tensor& gx = xp->grad_buf();
            for (std::int64_t n = 0; n < gx.n; ++n)
                for (std::int64_t ci = 0; ci < gx.c; ++ci) {
                    const double* src = g.plane(n, ci);
                    double* dst = gx.plane(n, ci);
                    for (std::int64_t y = 0; y < g.h; ++y)
                        for (std::int64_t xx = 0; xx < g.w; ++xx)
                            dst[(y / 2) * gx.w + (xx / 2)] += src[y * g.w + xx];
                }
        };
    }
    return node;
}

// Separable filter with circular boundary, constant taps (length 2r+1).
// Backward correlates with the flipped taps, also circularly.
inline Var sep_filter_circular(const Var& x, const std::vector<double>& taps) {
    const int r = static_cast<int>(taps.size() / 2);
    const Tensor& xv = x->val;
    auto run = [r](const Tensor& src, const std::vector<double>& t, Tensor& dst) {
        // horizontal then vertical
        Tensor tmp(src.n, src.c, src.h, src.w);
        for (std::int64_t n = 0; n < src.n; ++n)
            for (std::int64_t ci = 0; ci < src.c; ++ci) {
                const double* sp = src.plane(n, ci);
                double* tp = tmp.plane(n, ci);
                for (std::int64_t y = 0; y < src.h; ++y)
                    for (std::int64_t xx = 0; xx < src.w; ++xx) {
                        double acc = 0.0;
                        for (int k = -r; k <= r; ++k) {
                            std::int64_t xi = (xx + k) % src.w;
                            if (xi < 0) xi += src.w;
                            acc += t[static_cast<std::size_t>(k + r)] * sp[y * src.w + xi];
                        }
                        tp[y * src.w + xx] = acc;
                    }
                double* dp = dst.plane(n, ci);
                for (std::int64_t y = 0; y < src.h; ++y)
                    for (std::int64_t xx = 0; xx < src.w; ++xx) {
                        double acc = 0.0;
                        for (int k = -r; k <= r; ++k) {
                            std::int64_t yi = (y + k) % src.h;
                            if (yi < 0) yi += src.h;
                            acc += t[static_cast<std::size_t>(k + r)] * tp[yi * src.w + xx];
                        }
                        dp[y * src.w + xx] = acc;
                    }
            }
    };
    Tensor out(xv.n, xv.c, xv.h, xv.w);
    run(xv, taps, out);
    Var node = detail::make_node(std::move(out), {x});
    if (node->needs) {
        Node* np = node.get();
        Node* xp = x.get();
        std::vector<double> flipped(taps.rbegin(), taps.rend());
        node->back = [np, xp, flipped, run] {
            Tensor gx(np->grad.n, np->grad.c, np->grad.h, np->grad.w);
            run(np->grad, flipped, gx);
            Tensor& acc = xp->grad_buf();
            for (std::size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += gx.v[i];
        };
    }
    return node;
}

// ---------------------------------------------------------------------------
// Fourier ops. Real/imag parts travel as a doubled-channel tensor:
// channels [0,C) hold Re, [C,2C) hold Im. Transforms are unitary, matching
// fourier::decompose.
// ---------------------------------------------------------------------------

inline Var fft2_ri(const Var& x) {
    const Tensor& xv = x->val;
    Tensor out(xv.n, 2 * xv.c, xv.h, xv.w);
    const std::int64_t m = xv.h * xv.w;
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(m));
    for (std::int64_t n = 0; n < xv.n; ++n)
        for (std::int64_t ci = 0; ci < xv.c; ++ci) {
            const double* src = xv.plane(n, ci);
            for (std::int64_t i = 0; i < m; ++i) buf[i] = {src[i], 0.0};
            fourier::fft2d(buf.data(), buf.data(), static_cast<int>(xv.h), static_cast<int>(xv.w),
                           false);
            double* re = out.plane(n, ci);
            double* im = out.plane(n, xv.c + ci);
            for (std::int64_t i = 0; i < m; ++i) {
                re[i] = buf[i].real();
                im[i] = buf[i].imag();
            }
        }
    Var node = detail::make_node(std::move(out), {x});
    if (node->needs) {
        Node* np = node.get();
        Node* xp = x.get();
        node->back = [np, xp, m] {
            // adjoint of the unitary forward DFT: gx = Re(IFFT(gRe + i*gIm))
            Tensor& gx = xp->grad_buf();
            std::vector<std::complex<double>> buf(static_cast<std::size_t>(m));
            for (std::int64_t n = 0; n < gx.n; ++n)
                for (std::int64_t ci = 0; ci < gx.c; ++ci) {
                    const double* gre = np->grad.plane(n, ci);
                    const double* gim = np->grad.plane(n, gx.c + ci);
                    for (std::int64_t i = 0; i < m; ++i) buf[i] = {gre[i], gim[i]};
                    fourier::fft2d(buf.data(), buf.data(), static_cast<int>(gx.h),
                                   static_cast<int>(gx.w), true);
                    double* dst = gx.plane(n, ci);
                    for (std::int64_t i = 0; i < m; ++i) dst[i] += buf[i].real();
                }
        };
    }
    return node;
}

inline Var ifft2_real(const Var& ri) {
    const Tensor& xv = ri->val;
    if (xv.c % 2 != 0) throw DimensionError("ifft2_real: expected doubled Re/Im channels");
    const std::int64_t c = xv.c / 2;
    const std::int64_t m = xv.h * xv.w;
    Tensor out(xv.n, c, xv.h, xv.w);
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(m));
    for (std::int64_t n = 0; n < xv.n; ++n)
        for (std::int64_t ci = 0; ci < c; ++ci) {
            const double* re = xv.plane(n, ci);
            const double* im = xv.plane(n, c + ci);
            for (std::int64_t i = 0; i < m; ++i) buf[i] = {re[i], im[i]};
            fourier::fft2d(buf.data(), buf.data(), static_cast<int>(xv.h), static_cast<int>(xv.w),
                           true);
            double* dst = out.plane(n, ci);
            for (std::int64_t i = 0; i < m; ++i) dst[i] = buf[i].real();
        }
    Var node = detail::make_node(std::move(out), {ri});
    if (node->needs) {
        Node* np = node.get();
        Node* rp = ri.get();
        node->back = [np, rp, c, m] {
            // adjoint: (gRe, gIm) = FFT(g), split into parts
            Tensor& gri = rp->grad_buf();
            std::vector<std::complex<double>> buf(static_cast<std::size_t>(m));
            for (std::int64_t n = 0; n < gri.n; ++n)
                for (std::int64_t ci = 0; ci < c; ++ci) {
                    const double* g = np->grad.plane(n, ci);
                    for (std::int64_t i = 0; i < m; ++i) buf[i] = {g[i], 0.0};
                    fourier::fft2d(buf.data(), buf.data(), static_cast<int>(gri.h),
                                   static_cast<int>(gri.w), false);
                    double* gre = gri.plane(n, ci);
                    double* gim = gri.plane(n, c + ci);
                    for (std::int64_t i = 0; i < m; ++i) {
                        gre[i] += buf[i].real();
                        gim[i] += buf[i].imag();
                    }
                }
        };
    }
    return node;
}

inline Var amplitude_of(const Var& ri) {
    const Tensor& xv = ri->val;
    const std::int64_t c = xv.c / 2;
    const std::int64_t m = xv.h * xv.w;
    Tensor out(xv.n, c, xv.h, xv.w);
    for (std::int64_t n = 0; n < xv.n; ++n)
        for (std::int64_t ci = 0; ci < c; ++ci) {
            const double* re = xv.plane(n, ci);
            const double* im = xv.plane(n, c + ci);
            double* dst = out.plane(n, ci);
            for (std::int64_t i = 0; i < m; ++i) dst[i] = std::hypot(re[i], im[i]);
        }
    Var node = detail::make_node(std::move(out), {ri});
    if (node->needs) {
        Node* np = node.get();
        Node* rp = ri.get();
        node->back = [np, rp, c, m] {
            Tensor& gri = rp->grad_buf();
            for (std::int64_t n = 0; n < gri.n; ++n)
                for (std::int64_t ci = 0; ci < c; ++ci) {
                    const double* g = np->grad.plane(n, ci);
                    const double* a = np->val.plane(n, ci);
                    const double* re = rp->val.plane(n, ci);
                    const double* im = rp->val.plane(n, c + ci);
                    double* gre = gri.plane(n, ci);
                    double* gim = gri.plane(n, c + ci);
                    for (std::int64_t i = 0; i < m; ++i) {
                        const double denom = std::max(a[i], 1e-20);
                        gre[i] += g[i] * re[i] / denom;
                        gim[i] += g[i] * im[i] / denom;
                    }
                }
        };
    }
    return node;
}

inline Var phase_of(const Var& ri) {
    const Tensor& xv = ri->val;
    const std::int64_t c = xv.c / 2;
    const std::int64_t m = xv.h * xv.w;
    Tensor out(xv.n, c, xv.h, xv.w);
    for (std::int64_t n = 0; n < xv.n; ++n)
        for (std::int64_t ci = 0; ci < c; ++ci) {
            const double* re = xv.plane(n, ci);
            const double* im = xv.plane(n, c + ci);
            double* dst = out.plane(n, ci);
            for (std::int64_t i = 0; i < m; ++i)
                dst[i] = fourier::wrap_phase(std::atan2(im[i], re[i]));
        }
    Var node = detail::make_node(std::move(out), {ri});
    if (node->needs) {
        Node* np = node.get();
        Node* rp = ri.get();
        node->back = [np, rp, c, m] {
            Tensor& gri = rp->grad_buf();
            for (std::int64_t n = 0; n < gri.n; ++n)
                for (std::int64_t ci = 0; ci < c; ++ci) {
                    const double* g = np->grad.plane(n, ci);
                    const double* re = rp->val.plane(n, ci);
                    const double* im = rp->val.plane(n, c + ci);
                    double* gre = gri.plane(n, ci);
                    double* gim = gri.plane(n, c + ci);
                    for (std::int64_t i = 0; i < m; ++i) {
                        const double denom = re[i] * re[i] + im[i] * im[i] + 1e-12;
                        gre[i] += g[i] * (-im[i] / denom);
                        gim[i] += g[i] * (re[i] / denom);
                    }
                }
        };
    }
    return node;
}

// (A, P) -> Re/Im tensor: R = A cos P, I = A sin P
inline Var polar_to_ri(const Var& amp, const Var& phase) {
    require_same_shape(amp->val, phase->val, "polar_to_ri");
    const Tensor& av = amp->val;
    const std::int64_t m = av.h * av.w;
    Tensor out(av.n, 2 * av.c, av.h, av.w);
    for (std::int64_t n = 0; n < av.n; ++n)
        for (std::int64_t ci = 0; ci < av.c; ++ci) {
            const double* a = av.plane(n, ci);
            const double* p = phase->val.plane(n, ci);
            double* re = out.plane(n, ci);
            double* im = out.plane(n, av.c + ci);
            for (std::int64_t i = 0; i < m; ++i) {
                re[i] = a[i] * std::cos(p[i]);
                im[i] = a[i] * std::sin(p[i]);
            }
        }
    Var node = detail::make_node(std::move(out), {amp, phase});
    if (node->needs) {
        Node* np = node.get();
        Node* ap = amp.get();
        Node* pp = phase.get();
        node->back = [np, ap, pp, m] {
            const std::int64_t c = ap->val.c;
            for (std::int64_t n = 0; n < ap->val.n; ++n)
                for (std::int64_t ci = 0; ci < c; ++ci) {
                    const double* gre = np->grad.plane(n, ci);
                    const double* gim = np->grad.plane(n, c + ci);
                    const double* a = ap->val.plane(n, ci);
                    const double* p = pp->val.plane(n, ci);
                    for (std::int64_t i = 0; i < m; ++i) {
                        const double cp = std::cos(p[i]);
                        const double sp = std::sin(p[i]);
                        if (ap->needs)
                            ap->grad_buf().plane(n, ci)[i] += gre[i] * cp + gim[i] * sp;
                        if (pp->needs)
                            pp->grad_buf().plane(n, ci)[i] +=
                                a[i] * (-gre[i] * sp + gim[i] * cp);
                    }
                }
        };
    }
    return node;
}

}  // namespace fisp::ad
