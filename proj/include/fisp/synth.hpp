#pragma once

#include <cmath>

#include "fisp/image.hpp"

namespace fisp {

// Forward camera model used to fabricate RAW/RGB training pairs: inverse
// gamma, per-channel white-balance attenuation, CFA sampling, Poisson-
// Gaussian noise folded into a single signal-dependent Gaussian, and
// quantization to the sensor bit depth. Deterministic given the seed.
struct DegradationParams {
    double inverse_gamma = 2.2;
    std::array<double, 3> wb_gains = {2.0, 1.0, 1.5};
    double noise_read_sigma = 0.0;
    double noise_shot_gain = 0.0;
    std::uint64_t seed = 0;
    int bit_depth = 10;
    Cfa cfa = Cfa::kRggb;
};

inline RawImage synthesize_raw(const RgbImage& rgb, const DegradationParams& params) {
    if (params.inverse_gamma <= 0.0) throw ParameterError("synthesize_raw: inverse_gamma must be positive");
    for (double g : params.wb_gains)
        if (g <= 0.0) throw ParameterError("synthesize_raw: wb_gains must be positive");
    if (params.noise_read_sigma < 0.0 || params.noise_shot_gain < 0.0)
        throw ParameterError("synthesize_raw: noise parameters must be nonnegative");
    RawImage raw;
    raw.bit_depth = params.bit_depth;
    raw.cfa = params.cfa;
    const std::int64_t h = rgb.height();
    const std::int64_t w = rgb.width();
    if (h % 2 != 0 || w % 2 != 0)
        throw DimensionError("synthesize_raw: RGB dimensions must be even");
    raw.data = Tensor(1, 1, h, w);

    Rng rng(params.seed);
    const double full_scale = static_cast<double>((1 << params.bit_depth) - 1);
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            const int color = detail::cfa_color_at(params.cfa, y, x);
            const double srgb = rgb.data.at(0, color, y, x);
            double signal = std::pow(srgb, params.inverse_gamma) / params.wb_gains[color];
            const double var = params.noise_read_sigma * params.noise_read_sigma +
                               params.noise_shot_gain * signal;
            if (var > 0.0) signal += rng.normal() * std::sqrt(var);
            signal = std::round(clamp01(signal) * full_scale) / full_scale;
            raw.data.at(0, 0, y, x) = signal;
        }
    }
    return raw;
}

// Smooth procedural RGB content: low-frequency sinusoid gradients plus a
// few soft gaussian blobs per channel. Used by synth-data and the tests
// when no real photographs are at hand.
inline RgbImage make_procedural_rgb(std::int64_t h, std::int64_t w, std::uint64_t seed,
                                    int n_blobs = 6) {
    Rng rng(seed);
    RgbImage img{Tensor(1, 3, h, w)};

    struct Blob {
        double cy, cx, sigma, amp;
        int channel;
    };
    std::vector<Blob> blobs;
    for (int i = 0; i < n_blobs; ++i)
        blobs.push_back({rng.uniform(0.0, static_cast<double>(h)),
                         rng.uniform(0.0, static_cast<double>(w)),
                         rng.uniform(0.08, 0.30) * static_cast<double>(std::min(h, w)),
                         rng.uniform(-0.5, 0.5), static_cast<int>(rng.index(3))});

    std::array<double, 3> fy, fx, ph, base;
    for (int ch = 0; ch < 3; ++ch) {
        fy[ch] = rng.uniform(0.5, 2.0);
        fx[ch] = rng.uniform(0.5, 2.0);
        ph[ch] = rng.uniform(0.0, 2.0 * M_PI);
        base[ch] = rng.uniform(0.35, 0.65);
    }

    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            for (int ch = 0; ch < 3; ++ch) {
                double v = base[ch] +
                           0.22 * std::sin(2.0 * M_PI * fy[ch] * y / static_cast<double>(h) +
                                           2.0 * M_PI * fx[ch] * x / static_cast<double>(w) + ph[ch]);
                img.data.at(0, ch, y, x) = v;
            }
        }
    }
    for (const Blob& b : blobs) {
        for (std::int64_t y = 0; y < h; ++y) {
            for (std::int64_t x = 0; x < w; ++x) {
                const double d2 = (y - b.cy) * (y - b.cy) + (x - b.cx) * (x - b.cx);
                img.data.at(0, b.channel, y, x) += b.amp * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
            }
        }
    }
    for (auto& v : img.data.v) v = 0.05 + 0.90 * clamp01(v);
    return img;
}

}  // namespace fisp
