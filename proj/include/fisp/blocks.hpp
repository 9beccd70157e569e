#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fisp/nn.hpp"

namespace fisp::net {

using ad::Var;

// Named parameter registry. Order of registration is the canonical
// serialization order, so collect() must be deterministic.
struct ParamList {
    std::vector<std::pair<std::string, Var>> items;
    void add(const std::string& name, const Var& v) { items.emplace_back(name, v); }
    std::int64_t count() const {
        std::int64_t c = 0;
        for (const auto& [_, v] : items) c += v->val.numel();
        return c;
    }
};

struct Conv2d {
    Var w, b;
    int stride = 1;
    int pad = -1;

    void init(std::int64_t cin, std::int64_t cout, int k, Rng& rng, int stride_ = 1) {
        stride = stride_;
        pad = k / 2;
        Tensor wt(cout, cin, k, k);
        const double bound = 1.0 / std::sqrt(static_cast<double>(cin) * k * k);
        for (auto& x : wt.v) x = rng.uniform(-bound, bound);
        w = ad::leaf(std::move(wt), true);
        b = ad::leaf(Tensor(1, cout, 1, 1), true);
    }
    Var operator()(const Var& x) const { return ad::conv2d(x, w, b, stride, pad); }
    void collect(const std::string& prefix, ParamList& out) const {
        out.add(prefix + ".w", w);
        out.add(prefix + ".b", b);
    }
};

// Two pointwise convs with a leaky ReLU between; no output activation.
// Used on amplitude and phase maps, where an output nonlinearity would
// restrict the representable range.
struct PointwisePair {
    Conv2d c1, c2;
    void init(std::int64_t c, Rng& rng) {
        c1.init(c, c, 1, rng);
        c2.init(c, c, 1, rng);
    }
    Var operator()(const Var& x) const { return c2(ad::leaky_relu(c1(x))); }
    void collect(const std::string& prefix, ParamList& out) const {
        c1.collect(prefix + ".c1", out);
        c2.collect(prefix + ".c2", out);
    }
};

// Snapshot of a block's spectral state, taken before the inverse transform
// projects back to a real feature map. Lets tests check what the frequency
// path did and did not touch.
struct SpectrumTrace {
    Tensor amp_in, phase_in;    // decomposition of the transformed feature
    Tensor amp_mod, phase_mod;  // pair actually recombined
};

// Residual block with a frequency path that convolves one polar component
// of the spectrum and keeps the other fixed.
struct FreqResBlock {
    enum class Mode { kModulateAmplitude, kModulatePhase };

    Mode mode = Mode::kModulateAmplitude;
    bool freq_enabled = true;
    Conv2d conv_in, conv_spa;
    PointwisePair freq_conv;

    void init(std::int64_t c, Mode m, bool enabled, Rng& rng) {
        mode = m;
        freq_enabled = enabled;
        conv_in.init(c, c, 3, rng);
        conv_spa.init(c, c, 3, rng);
        if (freq_enabled) freq_conv.init(c, rng);
    }

    Var forward(const Var& f_f, const Var& f_s, SpectrumTrace* trace = nullptr) const {
        require_same_shape(f_f->val, f_s->val, "FreqResBlock");
        Var f1 = ad::leaky_relu(conv_in(f_f));
        Var f2;
        if (freq_enabled) {
            Var ri = ad::fft2_ri(f1);
            Var amp = ad::amplitude_of(ri);
            Var phase = ad::phase_of(ri);
            Var amp2 = amp, phase2 = phase;
            if (mode == Mode::kModulateAmplitude)
                amp2 = freq_conv(amp);
            else
                phase2 = freq_conv(phase);
            if (trace) {
                trace->amp_in = amp->val;
                trace->phase_in = phase->val;
                trace->amp_mod = amp2->val;
                trace->phase_mod = phase2->val;
            }
            f2 = ad::ifft2_real(ad::polar_to_ri(amp2, phase2));
        } else {
            f2 = f1;
            if (trace) *trace = SpectrumTrace{};
        }
        Var spa = ad::leaky_relu(conv_spa(f_s));
        return ad::add(ad::add(f2, spa), f_s);
    }

    void collect(const std::string& prefix, ParamList& out) const {
        conv_in.collect(prefix + ".conv_in", out);
        conv_spa.collect(prefix + ".conv_spa", out);
        if (freq_enabled) freq_conv.collect(prefix + ".freq", out);
    }
};

// Two 3x3 convs with instance normalization on half the channels of the
// first conv's output, plus a pointwise shortcut.
struct HalfNormBlock {
    Conv2d conv1, conv2, shortcut;
    Var in_gamma, in_beta;
    std::int64_t half = 0;

    void init(std::int64_t c, Rng& rng) {
        if (c % 2 != 0) throw DimensionError("HalfNormBlock: channel count must be even");
        half = c / 2;
        conv1.init(c, c, 3, rng);
        conv2.init(c, c, 3, rng);
        shortcut.init(c, c, 1, rng);
        in_gamma = ad::leaf(Tensor::full(1, half, 1, 1, 1.0), true);
        in_beta = ad::leaf(Tensor(1, half, 1, 1), true);
    }

    Var forward(const Var& x) const {
        Var h = conv1(x);
        Var lo = ad::slice_channels(h, 0, half);
        Var hi = ad::slice_channels(h, half, h->val.c);
        lo = ad::instance_norm(lo, in_gamma, in_beta);
        h = ad::leaky_relu(ad::concat_channels(lo, hi));
        h = ad::leaky_relu(conv2(h));
        return ad::add(h, shortcut(x));
    }

    void collect(const std::string& prefix, ParamList& out) const {
        conv1.collect(prefix + ".conv1", out);
        conv2.collect(prefix + ".conv2", out);
        shortcut.collect(prefix + ".shortcut", out);
        out.add(prefix + ".in_gamma", in_gamma);
        out.add(prefix + ".in_beta", in_beta);
    }
};

// Fuses a color/style feature into the main stream. Frequency branch:
// the amplitude of the stream is rescaled and shifted by maps predicted
// from the guide's amplitude (scale kept positive via softplus), and the
// two phases are fused by a pointwise conv over their concatenation.
// Spatial branch: HalfNormBlock on the stream. Branches are summed.
struct ColorAdaptBlock {
    PointwisePair scale_net, shift_net;
    Conv2d phase_fuse;
    HalfNormBlock spatial;

    void init(std::int64_t c, Rng& rng) {
        scale_net.init(c, rng);
        shift_net.init(c, rng);
        phase_fuse.init(2 * c, c, 1, rng);
        spatial.init(c, rng);
    }

    Var forward(const Var& stream, const Var& guide, Tensor* freq_out = nullptr) const {
        require_same_shape(stream->val, guide->val, "ColorAdaptBlock");
        Var ri_s = ad::fft2_ri(stream);
        Var amp_s = ad::amplitude_of(ri_s);
        Var phase_s = ad::phase_of(ri_s);
        Var ri_g = ad::fft2_ri(guide);
        Var amp_g = ad::amplitude_of(ri_g);
        Var phase_g = ad::phase_of(ri_g);

        Var scale = ad::softplus(scale_net(amp_g));
        Var shift = shift_net(amp_g);
        Var amp = ad::add(ad::mul(scale, amp_s), shift);
        Var phase = phase_fuse(ad::concat_channels(phase_s, phase_g));
        Var freq = ad::ifft2_real(ad::polar_to_ri(amp, phase));
        if (freq_out) *freq_out = freq->val;
        return ad::add(freq, spatial.forward(stream));
    }

    void collect(const std::string& prefix, ParamList& out) const {
        scale_net.collect(prefix + ".scale", out);
        shift_net.collect(prefix + ".shift", out);
        phase_fuse.collect(prefix + ".phase_fuse", out);
        spatial.collect(prefix + ".spatial", out);
    }
};

}  // namespace fisp::net
