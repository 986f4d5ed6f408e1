#include "ghs/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "ghs/errors.hpp"

namespace ghs {

namespace {
struct FileCloser {
    void operator()(FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;
}  // namespace

void write_png(const std::string& path, const Image& img) {
    if (img.c != 1 && img.c != 3)
        throw InvalidArgument("write_png: only 1 or 3 channels supported");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("write_png: cannot open " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: libpng failure for " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.w, img.h, 8,
                 img.c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> row(static_cast<size_t>(img.w) * img.c);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < img.c; ++ch) {
                double v = std::clamp(img.at(y, x, ch), 0.0, 1.0);
                row[static_cast<size_t>(x) * img.c + ch] =
                    static_cast<png_byte>(std::lround(v * 255.0));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("read_png: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: libpng failure for " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    int channels = png_get_channels(png, info);
    Image img(static_cast<int>(h), static_cast<int>(w), channels);
    std::vector<png_byte> row(png_get_rowbytes(png, info));
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x)
            for (int ch = 0; ch < channels; ++ch)
                img.at(y, x, ch) = row[static_cast<size_t>(x) * channels + ch] / 255.0;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_pfm(const std::string& path, const Image& img) {
    if (img.c != 1 && img.c != 3)
        throw InvalidArgument("write_pfm: only 1 or 3 channels supported");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("write_pfm: cannot open " + path);
    std::fprintf(fp.get(), "%s\n%d %d\n-1.0\n", img.c == 3 ? "PF" : "Pf", img.w, img.h);
    // PFM stores rows bottom-up.
    std::vector<float> row(static_cast<size_t>(img.w) * img.c);
    for (int y = img.h - 1; y >= 0; --y) {
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < img.c; ++ch)
                row[static_cast<size_t>(x) * img.c + ch] =
                    static_cast<float>(img.at(y, x, ch));
        std::fwrite(row.data(), sizeof(float), row.size(), fp.get());
    }
}

Image read_pfm(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("read_pfm: cannot open " + path);
    char tag[3] = {0};
    int w, h;
    double scale;
    if (std::fscanf(fp.get(), "%2s %d %d %lf", tag, &w, &h, &scale) != 4)
        throw std::runtime_error("read_pfm: malformed header in " + path);
    std::fgetc(fp.get());  // single whitespace after the scale
    int c = std::strcmp(tag, "PF") == 0 ? 3 : 1;
    if (scale > 0)
        throw std::runtime_error("read_pfm: big-endian PFM not supported");
    Image img(h, w, c);
    std::vector<float> row(static_cast<size_t>(w) * c);
    for (int y = h - 1; y >= 0; --y) {
        if (std::fread(row.data(), sizeof(float), row.size(), fp.get()) != row.size())
            throw std::runtime_error("read_pfm: truncated data in " + path);
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch)
                img.at(y, x, ch) = row[static_cast<size_t>(x) * c + ch];
    }
    return img;
}

double psnr(const Image& a, const Image& b) {
    if (a.size() != b.size()) throw ShapeError("psnr: image size mismatch");
    double mse = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= a.data.size();
    if (mse <= 0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(mse);
}

double mean_abs_error(const Image& a, const Image& b) {
    if (a.size() != b.size()) throw ShapeError("mae: image size mismatch");
    double s = 0;
    for (size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
    return s / a.data.size();
}

}  // namespace ghs
