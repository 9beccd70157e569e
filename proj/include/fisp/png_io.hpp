#pragma once

#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "fisp/tensor.hpp"

namespace fisp::pngio {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw DataError("cannot open file: " + path);
    return f;
}

}  // namespace detail

// Reads just the IHDR chunk; used for cheap dimension validation when
// indexing a dataset.
inline std::pair<int, int> png_dims(const std::string& path) {
    auto f = detail::open_file(path, "rb");
    unsigned char hdr[33];
    if (std::fread(hdr, 1, sizeof(hdr), f.get()) != sizeof(hdr))
        throw DataError("not a PNG (truncated header): " + path);
    static const unsigned char magic[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (std::memcmp(hdr, magic, 8) != 0 || std::memcmp(hdr + 12, "IHDR", 4) != 0)
        throw DataError("not a PNG: " + path);
    auto be32 = [&](int off) {
        return (hdr[off] << 24) | (hdr[off + 1] << 16) | (hdr[off + 2] << 8) | hdr[off + 3];
    };
    return {be32(16), be32(20)};  // width, height
}

// 16-bit grayscale PNG -> raw integer code values.
inline std::vector<std::uint16_t> read_gray16(const std::string& path, int& width, int& height) {
    auto f = detail::open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("libpng failed reading " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("expected 16-bit grayscale PNG: " + path);
    }
    png_set_swap(png);  // PNG stores big-endian samples
    std::vector<std::uint16_t> out(static_cast<std::size_t>(width) * height);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = reinterpret_cast<png_bytep>(out.data() + static_cast<std::size_t>(y) * width);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

// 8-bit PNG of any common color type -> RGB, values in [0,1].
inline Tensor read_rgb8(const std::string& path) {
    auto f = detail::open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("libpng failed reading " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    std::vector<unsigned char> buf(static_cast<std::size_t>(width) * height * 3);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * width * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor img(1, 3, height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int ch = 0; ch < 3; ++ch)
                img.at(0, ch, y, x) =
                    buf[(static_cast<std::size_t>(y) * width + x) * 3 + ch] / 255.0;
    return img;
}

inline void write_gray16(const std::string& path, const std::vector<std::uint16_t>& data,
                         int width, int height) {
    auto f = detail::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("libpng failed writing " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, width, height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = reinterpret_cast<png_bytep>(
            const_cast<std::uint16_t*>(data.data() + static_cast<std::size_t>(y) * width));
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Clamps to [0,1] and quantizes to 8 bits; clamping at the file boundary is
// part of the RgbImage contract.
inline void write_rgb8(const std::string& path, const Tensor& img) {
    if (img.n != 1 || img.c != 3) throw DimensionError("write_rgb8: expected (1,3,H,W) tensor");
    const int width = static_cast<int>(img.w);
    const int height = static_cast<int>(img.h);
    std::vector<unsigned char> buf(static_cast<std::size_t>(width) * height * 3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int ch = 0; ch < 3; ++ch)
                buf[(static_cast<std::size_t>(y) * width + x) * 3 + ch] =
                    static_cast<unsigned char>(std::lround(clamp01(img.at(0, ch, y, x)) * 255.0));

    auto f = detail::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("libpng failed writing " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * width * 3;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace fisp::pngio
