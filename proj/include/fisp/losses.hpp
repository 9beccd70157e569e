#pragma once

#include <array>
#include <fstream>
#include <optional>

#include "fisp/nn.hpp"

namespace fisp::loss {

using ad::Var;

struct LossWeights {
    double alpha = 0.1;  // frequency
    double beta = 0.1;   // phase
    double gamma = 0.1;  // amplitude
    double ssim_coeff = 0.5;
};

struct LossReport {
    double l_pha = 0, l_amp = 0, l_spa = 0, l_fre = 0;
    double l_vgg = 0, l_ssim = 0, l_1 = 0;
    double total = 0;
    bool extractor_fallback = false;
};

inline Var phase_loss_v(const Var& y, const Var& g) {
    require_same_shape(y->val, g->val, "phase_loss");
    return ad::mean_abs_diff(ad::phase_of(ad::fft2_ri(y)), ad::phase_of(ad::fft2_ri(g)));
}

inline Var amplitude_loss_v(const Var& y, const Var& g) {
    require_same_shape(y->val, g->val, "amplitude_loss");
    return ad::mean_abs_diff(ad::amplitude_of(ad::fft2_ri(y)), ad::amplitude_of(ad::fft2_ri(g)));
}

// Mean |dRe| plus mean |dIm|; the two parts are averaged separately so the
// value matches the sum-of-two-means definition, not a pooled mean.
inline Var frequency_loss_v(const Var& y, const Var& g) {
    require_same_shape(y->val, g->val, "frequency_loss");
    Var ry = ad::fft2_ri(y), rg = ad::fft2_ri(g);
    const std::int64_t c = y->val.c;
    Var re = ad::mean_abs_diff(ad::slice_channels(ry, 0, c), ad::slice_channels(rg, 0, c));
    Var im = ad::mean_abs_diff(ad::slice_channels(ry, c, 2 * c), ad::slice_channels(rg, c, 2 * c));
    return ad::add(re, im);
}

inline Var l1_loss_v(const Var& y, const Var& g) {
    require_same_shape(y->val, g->val, "l1_loss");
    return ad::mean_abs_diff(y, g);
}

inline std::vector<double> gaussian_taps(int radius, double sigma) {
    std::vector<double> t(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        const double v = std::exp(-0.5 * (k * k) / (sigma * sigma));
        t[static_cast<std::size_t>(k + radius)] = v;
        sum += v;
    }
    for (auto& v : t) v /= sum;
    return t;
}

// Differentiable SSIM, 11x11 Gaussian window sigma 1.5, circular boundary,
// peak 1. Identical math to the float-mode metric.
inline Var ssim_v(const Var& a, const Var& b) {
    require_same_shape(a->val, b->val, "ssim");
    if (a->val.h < 11 || a->val.w < 11)
        throw DimensionError("ssim: image smaller than the 11x11 window");
    static const std::vector<double> taps = gaussian_taps(5, 1.5);
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    Var mu_a = ad::sep_filter_circular(a, taps);
    Var mu_b = ad::sep_filter_circular(b, taps);
    Var aa = ad::sep_filter_circular(ad::mul(a, a), taps);
    Var bb = ad::sep_filter_circular(ad::mul(b, b), taps);
    Var ab = ad::sep_filter_circular(ad::mul(a, b), taps);
    Var va = ad::sub(aa, ad::mul(mu_a, mu_a));
    Var vb = ad::sub(bb, ad::mul(mu_b, mu_b));
    Var cov = ad::sub(ab, ad::mul(mu_a, mu_b));
    Var num = ad::mul(ad::affine(ad::scale(ad::mul(mu_a, mu_b), 2.0), 1.0, c1),
                      ad::affine(ad::scale(cov, 2.0), 1.0, c2));
    Var den = ad::mul(ad::affine(ad::add(ad::mul(mu_a, mu_a), ad::mul(mu_b, mu_b)), 1.0, c1),
                      ad::affine(ad::add(va, vb), 1.0, c2));
    return ad::mean_all(ad::div(num, den));
}

inline Var ssim_loss_v(const Var& y, const Var& g) {
    return ad::affine(ssim_v(y, g), -1.0, 1.0);  // 1 - SSIM
}

// Five-conv feature pyramid. Weights either come from a file or from a
// fixed seeded draw; the fallback is flagged so reports can disclose it.
struct FeatureExtractor {
    struct Layer {
        Var w, b;
    };
    std::vector<Layer> layers;
    bool fallback = false;

    static constexpr std::array<std::int64_t, 6> kChannels = {3, 8, 16, 32, 64, 64};
    static constexpr char kMagic[9] = "FISPPERC";

    static FeatureExtractor seeded_fallback() {
        FeatureExtractor fe;
        fe.fallback = true;
        Rng rng(0xFEA7u);
        for (int l = 0; l < 5; ++l) {
            const std::int64_t cin = kChannels[static_cast<std::size_t>(l)];
            const std::int64_t cout = kChannels[static_cast<std::size_t>(l + 1)];
            Tensor w(cout, cin, 3, 3);
            const double bound = 1.0 / std::sqrt(static_cast<double>(cin) * 9);
            for (auto& x : w.v) x = rng.uniform(-bound, bound);
            fe.layers.push_back({ad::constant(std::move(w)), ad::constant(Tensor(1, cout, 1, 1))});
        }
        return fe;
    }

    static std::optional<FeatureExtractor> from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) return std::nullopt;
        char magic[8];
        if (!in.read(magic, 8) || std::string(magic, 8) != std::string(kMagic, 8))
            return std::nullopt;
        FeatureExtractor fe;
        for (int l = 0; l < 5; ++l) {
            std::uint64_t dims[4];
            if (!in.read(reinterpret_cast<char*>(dims), sizeof dims)) return std::nullopt;
            Tensor w(static_cast<std::int64_t>(dims[0]), static_cast<std::int64_t>(dims[1]),
                     static_cast<std::int64_t>(dims[2]), static_cast<std::int64_t>(dims[3]));
            if (!in.read(reinterpret_cast<char*>(w.v.data()),
                         static_cast<std::streamsize>(w.v.size() * sizeof(double))))
                return std::nullopt;
            Tensor b(1, w.n, 1, 1);
            if (!in.read(reinterpret_cast<char*>(b.v.data()),
                         static_cast<std::streamsize>(b.v.size() * sizeof(double))))
                return std::nullopt;
            if (l == 0 && w.c != 3) return std::nullopt;
            fe.layers.push_back({ad::constant(std::move(w)), ad::constant(std::move(b))});
        }
        return fe;
    }

    // Returns the per-layer feature maps (all five taps).
    std::vector<Var> features(const Var& x) const {
        std::vector<Var> out;
        Var h = x;
        for (const auto& layer : layers) {
            h = ad::leaky_relu(ad::conv2d(h, layer.w, layer.b, 2, 1));
            out.push_back(h);
        }
        return out;
    }
};

inline Var perceptual_loss_v(const Var& y, const Var& g, const FeatureExtractor& fe) {
    require_same_shape(y->val, g->val, "perceptual_loss");
    auto fy = fe.features(y);
    auto fg = fe.features(g);
    Var acc = ad::mean_abs_diff(fy[0], fg[0]);
    for (std::size_t l = 1; l < fy.size(); ++l)
        acc = ad::add(acc, ad::mean_abs_diff(fy[l], fg[l]));
    return ad::scale(acc, 1.0 / static_cast<double>(fy.size()));
}

struct TotalLoss {
    Var total;
    LossReport report;
};

// The reported total is the graph value itself; the bookkeeping identity
// total == l_spa + alpha*l_fre + beta*l_pha + gamma*l_amp holds bitwise
// because both sides perform the same left-to-right double arithmetic.
inline TotalLoss total_loss_v(const Var& y, const Var& y_structure, const Var& y_color,
                              const Var& g, const LossWeights& w, const FeatureExtractor& fe) {
    Var l_pha = phase_loss_v(y_structure, g);
    Var l_amp = amplitude_loss_v(y_color, g);
    Var l_fre = frequency_loss_v(y, g);
    Var l_vgg = perceptual_loss_v(y, g, fe);
    Var l_ssim = ssim_loss_v(y, g);
    Var l_1 = l1_loss_v(y, g);
    Var l_spa = ad::add(ad::add(l_vgg, ad::scale(l_ssim, w.ssim_coeff)), l_1);
    Var total = ad::add(
        ad::add(ad::add(l_spa, ad::scale(l_fre, w.alpha)), ad::scale(l_pha, w.beta)),
        ad::scale(l_amp, w.gamma));
    TotalLoss out;
    out.total = total;
    out.report.l_pha = l_pha->val.v[0];
    out.report.l_amp = l_amp->val.v[0];
    out.report.l_fre = l_fre->val.v[0];
    out.report.l_vgg = l_vgg->val.v[0];
    out.report.l_ssim = l_ssim->val.v[0];
    out.report.l_1 = l_1->val.v[0];
    out.report.l_spa = l_spa->val.v[0];
    out.report.total = total->val.v[0];
    out.report.extractor_fallback = fe.fallback;
    return out;
}

// Plain-tensor wrappers for tests and tooling.
inline double phase_loss(const Tensor& y, const Tensor& g) {
    return phase_loss_v(ad::constant(y), ad::constant(g))->val.v[0];
}
inline double amplitude_loss(const Tensor& y, const Tensor& g) {
    return amplitude_loss_v(ad::constant(y), ad::constant(g))->val.v[0];
}
inline double frequency_loss(const Tensor& y, const Tensor& g) {
    return frequency_loss_v(ad::constant(y), ad::constant(g))->val.v[0];
}
inline double l1_loss(const Tensor& y, const Tensor& g) {
    return l1_loss_v(ad::constant(y), ad::constant(g))->val.v[0];
}
inline double ssim_loss(const Tensor& y, const Tensor& g) {
    return ssim_loss_v(ad::constant(y), ad::constant(g))->val.v[0];
}
inline double perceptual_loss(const Tensor& y, const Tensor& g, const FeatureExtractor& fe) {
    return perceptual_loss_v(ad::constant(y), ad::constant(g), fe)->val.v[0];
}

}  // namespace fisp::loss
