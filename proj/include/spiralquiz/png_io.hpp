#pragma once

#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "spiralquiz/image.hpp"

namespace spiralquiz {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_fail(png_structp, png_const_charp msg) {
    throw std::runtime_error(std::string("png: ") + (msg ? msg : "error"));
}
inline void png_quiet(png_structp, png_const_charp) {}

}  // namespace detail

/// Load a PNG as grayscale in [0,1]; color converts to luminance, alpha
/// composites over white.
inline GrayImage read_png_gray(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open " + path);
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_fail, detail::png_quiet);
    if (!png) throw std::runtime_error("png: allocation failure");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png: allocation failure");
    }
    try {
        png_init_io(png, fp.get());
        png_read_png(png, info,
                     PNG_TRANSFORM_STRIP_16 | PNG_TRANSFORM_PACKING | PNG_TRANSFORM_EXPAND,
                     nullptr);
        const int w = static_cast<int>(png_get_image_width(png, info));
        const int h = static_cast<int>(png_get_image_height(png, info));
        const int channels = png_get_channels(png, info);
        png_bytepp rows = png_get_rows(png, info);
        if (channels < 1 || channels > 4)
            throw std::runtime_error("png: unsupported channel count in " + path);
        GrayImage img(w, h);
        for (int y = 0; y < h; ++y) {
            const png_bytep row = rows[y];
            for (int x = 0; x < w; ++x) {
                const png_bytep p = row + static_cast<size_t>(x) * channels;
                double v, a = 1.0;
                if (channels <= 2) {
                    v = p[0] / 255.0;
                    if (channels == 2) a = p[1] / 255.0;
                } else {
                    v = (0.2126 * p[0] + 0.7152 * p[1] + 0.0722 * p[2]) / 255.0;
                    if (channels == 4) a = p[3] / 255.0;
                }
                img.at(x, y) = static_cast<float>(a * v + (1.0 - a));
            }
        }
        png_destroy_read_struct(&png, &info, nullptr);
        return img;
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
}

namespace detail {

inline void write_png_rows(const std::string& path, int w, int h, int color_type,
                           const std::vector<png_bytep>& rows) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot write " + path);
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_quiet);
    if (!png) throw std::runtime_error("png: allocation failure");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png: allocation failure");
    }
    try {
        png_init_io(png, fp.get());
        png_set_IHDR(png, info, w, h, 8, color_type, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_set_rows(png, info, const_cast<png_bytepp>(rows.data()));
        png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
        png_destroy_write_struct(&png, &info);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
}

}  // namespace detail

inline void write_png(const std::string& path, const GrayImage& img) {
    std::vector<png_byte> bytes(img.size());
    for (size_t i = 0; i < img.size(); ++i) {
        float v = std::clamp(img.samples[i], 0.0f, 1.0f);
        bytes[i] = static_cast<png_byte>(std::lround(v * 255.0f));
    }
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = bytes.data() + static_cast<size_t>(y) * img.width;
    detail::write_png_rows(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, rows);
}

inline void write_png(const std::string& path, const ColorImage& img) {
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.rgb.data()) + static_cast<size_t>(y) * img.width * 3;
    detail::write_png_rows(path, img.width, img.height, PNG_COLOR_TYPE_RGB, rows);
}

}  // namespace spiralquiz
