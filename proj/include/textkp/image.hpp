#ifndef TEXTKP_IMAGE_HPP
#define TEXTKP_IMAGE_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include <png.h>

#include "textkp/point.hpp"

namespace textkp {

struct ImageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// 8-bit RGB raster, row-major, interleaved.
struct ImageU8 {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels; // width * height * 3

    ImageU8() = default;
    ImageU8(int w, int h, uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, fill) {}

    size_t idx(int x, int y) const { return (static_cast<size_t>(y) * width + x) * 3; }
    uint8_t* at(int x, int y) { return pixels.data() + idx(x, y); }
    const uint8_t* at(int x, int y) const { return pixels.data() + idx(x, y); }

    bool operator==(const ImageU8& o) const {
        return width == o.width && height == o.height && pixels == o.pixels;
    }
};

// Bilinear sample with pixel centers at integer + 0.5 and edge clamping.
inline void sample_bilinear(const ImageU8& img, double x, double y, uint8_t out[3]) {
    const double fx = x - 0.5;
    const double fy = y - 0.5;
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const double tx = fx - x0;
    const double ty = fy - y0;
    auto cl = [&](int ix, int iy) {
        ix = std::clamp(ix, 0, img.width - 1);
        iy = std::clamp(iy, 0, img.height - 1);
        return img.at(ix, iy);
    };
    const uint8_t* p00 = cl(x0, y0);
    const uint8_t* p10 = cl(x0 + 1, y0);
    const uint8_t* p01 = cl(x0, y0 + 1);
    const uint8_t* p11 = cl(x0 + 1, y0 + 1);
    for (int c = 0; c < 3; ++c) {
        const double v = (1 - ty) * ((1 - tx) * p00[c] + tx * p10[c]) +
                         ty * ((1 - tx) * p01[c] + tx * p11[c]);
        out[c] = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
}

inline void write_png(const ImageU8& img, const std::filesystem::path& path) {
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw ImageError("cannot open for writing: " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw ImageError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw ImageError("png write failed: " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.pixels.data() + static_cast<size_t>(y) * img.width * 3);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

inline ImageU8 read_png(const std::filesystem::path& path) {
    FILE* fp = std::fopen(path.string().c_str(), "rb");
    if (!fp) throw ImageError("cannot open: " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw ImageError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw ImageError("png read failed: " + path.string());
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    // normalize everything to 8-bit RGB
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    ImageU8 img(static_cast<int>(png_get_image_width(png, info)),
                static_cast<int>(png_get_image_height(png, info)));
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = img.pixels.data() + static_cast<size_t>(y) * img.width * 3;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

} // namespace textkp

#endif
