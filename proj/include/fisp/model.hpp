#pragma once

#include "fisp/blocks.hpp"
#include "fisp/image.hpp"

namespace fisp::net {

struct ModelConfig {
    std::int64_t base_channels = 24;  // one of 16, 24, 48
    int n_blocks_structure = 4;
    int n_blocks_color = 4;
    int fusion_scales = 3;
    bool enable_phase_branch = true;
    bool enable_amplitude_branch = true;
    std::uint64_t seed = 1;

    void validate() const {
        if (base_channels != 16 && base_channels != 24 && base_channels != 48)
            throw ConfigError("base_channels must be 16, 24 or 48, got " +
                              std::to_string(base_channels));
        if (n_blocks_structure < 1 || n_blocks_color < 1)
            throw ConfigError("block counts must be >= 1");
        if (fusion_scales < 2) throw ConfigError("fusion_scales must be >= 2");
    }
};

struct ModelOutputs {
    Tensor y;            // final rendition
    Tensor y_structure;  // preview from the packed-raw (phase) branch
    Tensor y_color;      // preview from the demosaiced (amplitude) branch
};

// Packed-raw branch. Runs at half resolution on base_channels*4 features,
// then depth-to-space back to full resolution.
struct StructureNet {
    Conv2d conv_in, proj;
    std::vector<FreqResBlock> blocks;

    void init(const ModelConfig& cfg, Rng& rng) {
        const std::int64_t c4 = cfg.base_channels * 4;
        conv_in.init(4, c4, 3, rng);
        blocks.resize(static_cast<std::size_t>(cfg.n_blocks_structure));
        for (auto& blk : blocks)
            blk.init(c4, FreqResBlock::Mode::kModulatePhase, cfg.enable_phase_branch, rng);
        proj.init(cfg.base_channels, 3, 1, rng);
    }

    // packed (N,4,H/2,W/2) -> features (N,C,H,W) and preview (N,3,H,W)
    std::pair<Var, Var> forward(const Var& packed) const {
        Var x = ad::leaky_relu(conv_in(packed));
        for (const auto& blk : blocks) x = blk.forward(x, x);
        Var feat = ad::pixel_shuffle2(x);
        return {feat, proj(feat)};
    }

    void collect(const std::string& prefix, ParamList& out) const {
        conv_in.collect(prefix + ".conv_in", out);
        for (std::size_t i = 0; i < blocks.size(); ++i)
            blocks[i].collect(prefix + ".block" + std::to_string(i), out);
        proj.collect(prefix + ".proj", out);
    }
};

// Demosaiced-image branch at full resolution.
struct ColorNet {
    Conv2d conv_in, proj;
    std::vector<FreqResBlock> blocks;

    void init(const ModelConfig& cfg, Rng& rng) {
        conv_in.init(3, cfg.base_channels, 3, rng);
        blocks.resize(static_cast<std::size_t>(cfg.n_blocks_color));
        for (auto& blk : blocks)
            blk.init(cfg.base_channels, FreqResBlock::Mode::kModulateAmplitude,
                     cfg.enable_amplitude_branch, rng);
        proj.init(cfg.base_channels, 3, 1, rng);
    }

    std::pair<Var, Var> forward(const Var& dem) const {
        Var x = ad::leaky_relu(conv_in(dem));
        for (const auto& blk : blocks) x = blk.forward(x, x);
        return {x, proj(x)};
    }

    void collect(const std::string& prefix, ParamList& out) const {
        conv_in.collect(prefix + ".conv_in", out);
        for (std::size_t i = 0; i < blocks.size(); ++i)
            blocks[i].collect(prefix + ".block" + std::to_string(i), out);
        proj.collect(prefix + ".proj", out);
    }
};

// U-Net over the structure stream. Each encoder level adapts the stream
// with the current color feature; the adapted map, downsampled, becomes
// the color feature for the next level. Decoder uses nearest-neighbor
// upsampling and skip concatenation.
struct FusionNet {
    int scales = 3;
    std::vector<ColorAdaptBlock> adapt;      // one per level
    std::vector<Conv2d> down_stream, down_guide;  // levels 0..L-2, stride 2
    std::vector<Conv2d> up_conv, fuse_conv;  // levels L-2..0
    Conv2d proj;

    void init(const ModelConfig& cfg, Rng& rng) {
        scales = cfg.fusion_scales;
        const std::int64_t c0 = cfg.base_channels;
        adapt.resize(static_cast<std::size_t>(scales));
        for (int l = 0; l < scales; ++l) adapt[static_cast<std::size_t>(l)].init(c0 << l, rng);
        down_stream.resize(static_cast<std::size_t>(scales - 1));
        down_guide.resize(static_cast<std::size_t>(scales - 1));
        for (int l = 0; l + 1 < scales; ++l) {
            down_stream[static_cast<std::size_t>(l)].init(c0 << l, c0 << (l + 1), 3, rng, 2);
            down_guide[static_cast<std::size_t>(l)].init(c0 << l, c0 << (l + 1), 3, rng, 2);
        }
        up_conv.resize(static_cast<std::size_t>(scales - 1));
        fuse_conv.resize(static_cast<std::size_t>(scales - 1));
        for (int l = scales - 2; l >= 0; --l) {
            up_conv[static_cast<std::size_t>(l)].init(c0 << (l + 1), c0 << l, 3, rng);
            fuse_conv[static_cast<std::size_t>(l)].init((c0 << l) * 2, c0 << l, 3, rng);
        }
        proj.init(c0, 3, 1, rng);
    }

    Var forward(const Var& f_structure, const Var& f_color) const {
        const std::int64_t div = std::int64_t{1} << (scales - 1);
        if (f_structure->val.h % div != 0 || f_structure->val.w % div != 0)
            throw DimensionError("fusion input dims must be divisible by " + std::to_string(div));
        require_same_shape(f_structure->val, f_color->val, "FusionNet");

        std::vector<Var> skips(static_cast<std::size_t>(scales));
        Var stream = f_structure, guide = f_color;
        for (int l = 0; l < scales; ++l) {
            Var m = adapt[static_cast<std::size_t>(l)].forward(stream, guide);
            skips[static_cast<std::size_t>(l)] = m;
            if (l + 1 < scales) {
                stream = ad::leaky_relu(down_stream[static_cast<std::size_t>(l)](m));
                guide = ad::leaky_relu(down_guide[static_cast<std::size_t>(l)](m));
            }
        }
        Var u = skips[static_cast<std::size_t>(scales - 1)];
        for (int l = scales - 2; l >= 0; --l) {
            u = ad::leaky_relu(up_conv[static_cast<std::size_t>(l)](ad::upsample_nearest2(u)));
            u = ad::concat_channels(u, skips[static_cast<std::size_t>(l)]);
            u = ad::leaky_relu(fuse_conv[static_cast<std::size_t>(l)](u));
        }
        return proj(u);
    }

    void collect(const std::string& prefix, ParamList& out) const {
        for (std::size_t l = 0; l < adapt.size(); ++l)
            adapt[l].collect(prefix + ".adapt" + std::to_string(l), out);
        for (std::size_t l = 0; l < down_stream.size(); ++l) {
            down_stream[l].collect(prefix + ".down_stream" + std::to_string(l), out);
            down_guide[l].collect(prefix + ".down_guide" + std::to_string(l), out);
        }
        for (std::size_t l = 0; l < up_conv.size(); ++l) {
            up_conv[l].collect(prefix + ".up" + std::to_string(l), out);
            fuse_conv[l].collect(prefix + ".fuse" + std::to_string(l), out);
        }
        proj.collect(prefix + ".proj", out);
    }
};

struct ModelOutputsVars {
    Var y, y_structure, y_color;
};

struct IspModel {
    ModelConfig config;
    StructureNet structure;
    ColorNet color;
    FusionNet fusion;

    // Construction order is fixed; the seeded generator makes two models
    // built from the same config bit-identical.
    explicit IspModel(const ModelConfig& cfg) : config(cfg) {
        config.validate();
        Rng rng(config.seed);
        structure.init(config, rng);
        color.init(config, rng);
        fusion.init(config, rng);
    }

    ParamList params() const {
        ParamList out;
        structure.collect("structure", out);
        color.collect("color", out);
        fusion.collect("fusion", out);
        return out;
    }

    std::int64_t param_count() const { return params().count(); }

    // Differentiable forward from a batched packed/demosaiced pair.
    ModelOutputsVars forward_vars(const Var& packed, const Var& dem) const;

    ModelOutputs forward(const RawImage& raw) const;
};

inline ModelOutputsVars IspModel::forward_vars(const Var& packed, const Var& dem) const {
    auto [f_s, y_s] = structure.forward(packed);
    auto [f_c, y_c] = color.forward(dem);
    Var y = fusion.forward(f_s, f_c);
    return {y, y_s, y_c};
}

inline ModelOutputs IspModel::forward(const RawImage& raw) const {
    PackedRaw packed = pack_bayer(raw);
    RgbImage dem = demosaic(raw);
    auto out = forward_vars(ad::constant(packed.data), ad::constant(dem.data));
    return {out.y->val, out.y_structure->val, out.y_color->val};
}

}  // namespace fisp::net
