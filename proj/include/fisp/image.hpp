#pragma once

#include <array>
#include <cctype>
#include <string>

#include "fisp/tensor.hpp"

namespace fisp {

enum class Cfa { kRggb, kBggr, kGrbg, kGbrg };

inline std::string cfa_name(Cfa c) {
    switch (c) {
        case Cfa::kRggb: return "RGGB";
        case Cfa::kBggr: return "BGGR";
        case Cfa::kGrbg: return "GRBG";
        case Cfa::kGbrg: return "GBRG";
    }
    return "?";
}

inline Cfa cfa_from_name(const std::string& s) {
    std::string up = s;
    for (char& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (up == "RGGB") return Cfa::kRggb;
    if (up == "BGGR") return Cfa::kBggr;
    if (up == "GRBG") return Cfa::kGrbg;
    if (up == "GBRG") return Cfa::kGbrg;
    throw ConfigError("unknown CFA pattern: " + s);
}

// Packed channel indices, fixed regardless of the CFA on the sensor.
enum PackedChannel { kPackedR = 0, kPackedGr = 1, kPackedGb = 2, kPackedB = 3 };

// For each CFA, the packed channel sampled at tile offset (dy, dx),
// dy*2 + dx indexing row-major across the 2x2 tile.
inline const std::array<int, 4>& cfa_tile_channels(Cfa cfa) {
    static const std::array<int, 4> rggb{kPackedR, kPackedGr, kPackedGb, kPackedB};
    static const std::array<int, 4> bggr{kPackedB, kPackedGb, kPackedGr, kPackedR};
    static const std::array<int, 4> grbg{kPackedGr, kPackedR, kPackedB, kPackedGb};
    static const std::array<int, 4> gbrg{kPackedGb, kPackedB, kPackedR, kPackedGr};
    switch (cfa) {
        case Cfa::kRggb: return rggb;
        case Cfa::kBggr: return bggr;
        case Cfa::kGrbg: return grbg;
        case Cfa::kGbrg: return gbrg;
    }
    return rggb;
}

// Single-channel Bayer mosaic, values normalized to [0,1].
struct RawImage {
    Tensor data;  // (1,1,H,W)
    int bit_depth = 10;
    Cfa cfa = Cfa::kRggb;

    std::int64_t height() const { return data.h; }
    std::int64_t width() const { return data.w; }
};

// (H/2)x(W/2)x4 tensor, channel order always (R, G_r, G_b, B).
struct PackedRaw {
    Tensor data;  // (1,4,H/2,W/2)
};

// Full-resolution RGB in [0,1] at file boundaries; unclamped internally.
struct RgbImage {
    Tensor data;  // (1,3,H,W)

    std::int64_t height() const { return data.h; }
    std::int64_t width() const { return data.w; }
};

inline void require_even_dims(const RawImage& raw, const char* where) {
    if (raw.height() % 2 != 0 || raw.width() % 2 != 0)
        throw DimensionError(std::string(where) + ": RAW dimensions must be even, got " +
                             std::to_string(raw.height()) + "x" + std::to_string(raw.width()));
}

// Rearranges the mosaic into 4 half-resolution planes. Channel order is
// normalized to (R, G_r, G_b, B) whatever the sensor layout, so downstream
// network weights are CFA-agnostic.
inline PackedRaw pack_bayer(const RawImage& raw) {
    require_even_dims(raw, "pack_bayer");
    const std::int64_t hh = raw.height() / 2;
    const std::int64_t hw = raw.width() / 2;
    PackedRaw packed{Tensor(1, 4, hh, hw)};
    const auto& tile = cfa_tile_channels(raw.cfa);
    for (std::int64_t y = 0; y < hh; ++y)
        for (std::int64_t x = 0; x < hw; ++x)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx)
                    packed.data.at(0, tile[dy * 2 + dx], y, x) =
                        raw.data.at(0, 0, 2 * y + dy, 2 * x + dx);
    return packed;
}

// Exact inverse of pack_bayer.
inline RawImage unpack_bayer(const PackedRaw& packed, Cfa cfa, int bit_depth = 10) {
    RawImage raw;
    raw.bit_depth = bit_depth;
    raw.cfa = cfa;
    raw.data = Tensor(1, 1, packed.data.h * 2, packed.data.w * 2);
    const auto& tile = cfa_tile_channels(cfa);
    for (std::int64_t y = 0; y < packed.data.h; ++y)
        for (std::int64_t x = 0; x < packed.data.w; ++x)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx)
                    raw.data.at(0, 0, 2 * y + dy, 2 * x + dx) =
                        packed.data.at(0, tile[dy * 2 + dx], y, x);
    return raw;
}

namespace detail {

// reflect-101 mirror: -1 -> 1, H -> H-2
inline std::int64_t mirror(std::int64_t i, std::int64_t n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    return i;
}

// RGB plane index (0=R,1=G,2=B) natively sampled at pixel (y, x).
inline int cfa_color_at(Cfa cfa, std::int64_t y, std::int64_t x) {
    const int packed = cfa_tile_channels(cfa)[(y % 2) * 2 + (x % 2)];
    switch (packed) {
        case kPackedR: return 0;
        case kPackedB: return 2;
        default: return 1;
    }
}

}  // namespace detail

// Bilinear demosaic with mirror padding. Implemented as masked
// normalized convolution: sparse per-color planes filtered with the
// classic 3x3 kernels, divided by the filtered mask. Native CFA samples
// pass through exactly.
inline RgbImage demosaic(const RawImage& raw) {
    require_even_dims(raw, "demosaic");
    const std::int64_t h = raw.height();
    const std::int64_t w = raw.width();
    RgbImage out{Tensor(1, 3, h, w)};

    // Bilinear stencils. Green uses the cross kernel (its diagonal
    // neighbors are green too and must not leak into native samples);
    // red/blue use the full kernel.
    static const double kFull[3][3] = {{1, 2, 1}, {2, 4, 2}, {1, 2, 1}};
    static const double kCross[3][3] = {{0, 1, 0}, {1, 4, 1}, {0, 1, 0}};

    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            for (int color = 0; color < 3; ++color) {
                const auto& kernel = (color == 1) ? kCross : kFull;
                double num = 0.0, den = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const std::int64_t yy = detail::mirror(y + dy, h);
                        const std::int64_t xx = detail::mirror(x + dx, w);
                        if (detail::cfa_color_at(raw.cfa, yy, xx) != color) continue;
                        const double k = kernel[dy + 1][dx + 1];
                        num += k * raw.data.at(0, 0, yy, xx);
                        den += k;
                    }
                }
                out.data.at(0, color, y, x) = num / den;
            }
        }
    }
    return out;
}

}  // namespace fisp
