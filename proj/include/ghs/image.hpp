#pragma once

// Row-major, channel-last floating point image with 8-bit PNG and raw float
// PFM input/output.

#include <string>
#include <vector>

#include "ghs/vecmath.hpp"

namespace ghs {

struct Image {
    int h = 0, w = 0, c = 0;
    std::vector<double> data;  // h * w * c

    Image() = default;
    Image(int h_, int w_, int c_, double fill = 0.0)
        : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_, fill) {}

    double& at(int y, int x, int ch) {
        return data[(static_cast<size_t>(y) * w + x) * c + ch];
    }
    double at(int y, int x, int ch) const {
        return data[(static_cast<size_t>(y) * w + x) * c + ch];
    }
    Vec3 rgb_at(int y, int x) const {
        size_t i = (static_cast<size_t>(y) * w + x) * c;
        return {data[i], data[i + 1], data[i + 2]};
    }
    void set_rgb(int y, int x, const Vec3& v) {
        size_t i = (static_cast<size_t>(y) * w + x) * c;
        data[i] = v.x;
        data[i + 1] = v.y;
        data[i + 2] = v.z;
    }
    size_t size() const { return data.size(); }
};

// 8-bit PNG; values clamped to [0,1] on write. Supports c = 1 or 3.
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

// Raw float PFM ("PF" color / "Pf" gray, little-endian).
void write_pfm(const std::string& path, const Image& img);
Image read_pfm(const std::string& path);

double psnr(const Image& a, const Image& b);
double mean_abs_error(const Image& a, const Image& b);

}  // namespace ghs
