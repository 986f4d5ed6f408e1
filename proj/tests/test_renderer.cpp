#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "ghs/renderer.hpp"

using namespace ghs;

namespace {

// Direct per-pixel evaluation of the compositing sum over depth-sorted
// splats. Opacities are kept small enough in the tests that the rasterizer's
// 3-sigma culling never drops a contribution above the 1/255 skip.
RenderLayer brute_force_layer(const std::vector<Splat2D>& splats, int w,
                              int h) {
    std::vector<int> order(splats.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return splats[a].depth < splats[b].depth;
    });
    RenderLayer layer(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double T = 1.0;
            Vec3 c{0, 0, 0};
            for (int idx : order) {
                const Splat2D& s = splats[idx];
                Vec2 d{x - s.mu2d.x, y - s.mu2d.y};
                double a11 = s.cov2d(0, 0), a12 = s.cov2d(0, 1),
                       a22 = s.cov2d(1, 1);
                double det = a11 * a22 - a12 * a12;
                double q = (a22 * d.x * d.x - 2 * a12 * d.x * d.y +
                            a11 * d.y * d.y) / det;
                double alpha =
                    std::min(kAlphaClamp, s.opacity * std::exp(-0.5 * q));
                if (alpha < kMinContribution) continue;
                c += s.rgb * (alpha * T);
                T *= 1.0 - alpha;
            }
            layer.color.set_rgb(y, x, c);
            layer.alpha.at(y, x, 0) = 1.0 - T;
        }
    return layer;
}

std::vector<Splat2D> random_scene(std::mt19937& rng, int n, int w, int h) {
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<Splat2D> splats(n);
    for (auto& s : splats) {
        s.mu2d = {u(rng) * (w - 1), u(rng) * (h - 1)};
        double sx = 0.5 + 2 * u(rng), sy = 0.5 + 2 * u(rng);
        double rho = 0.8 * (u(rng) - 0.5);
        s.cov2d = {{{sx * sx, rho * sx * sy}, {rho * sx * sy, sy * sy}}};
        s.depth = 1 + u(rng);
        s.rgb = {u(rng), u(rng), u(rng)};
        s.opacity = 0.1 + 0.25 * u(rng);
    }
    return splats;
}

double max_layer_diff(const RenderLayer& a, const RenderLayer& b) {
    double m = 0;
    for (size_t i = 0; i < a.color.data.size(); ++i)
        m = std::max(m, std::abs(a.color.data[i] - b.color.data[i]));
    for (size_t i = 0; i < a.alpha.data.size(); ++i)
        m = std::max(m, std::abs(a.alpha.data[i] - b.alpha.data[i]));
    return m;
}

}  // namespace

TEST_CASE("empty splat list renders nothing") {
    RenderLayer layer = splat_layer({}, 8, 8);
    for (double v : layer.color.data) CHECK(v == 0.0);
    for (double v : layer.alpha.data) CHECK(v == 0.0);
}

TEST_CASE("single centered splat") {
    Splat2D s;
    s.mu2d = {4, 4};
    s.cov2d = Mat2::identity();
    s.depth = 1;
    s.rgb = {1, 0, 0};
    s.opacity = 0.5;
    RenderLayer layer = splat_layer({s}, 9, 9);
    CHECK(layer.color.rgb_at(4, 4).x == doctest::Approx(0.5));
    CHECK(layer.color.rgb_at(4, 4).y == doctest::Approx(0.0));
    CHECK(layer.alpha.at(4, 4, 0) == doctest::Approx(0.5));
}

TEST_CASE("matches brute-force compositing on random scenes") {
    std::mt19937 rng(21);
    for (int t = 0; t < 20; ++t) {
        auto splats = random_scene(rng, 3, 8, 8);
        RenderLayer got = splat_layer(splats, 8, 8);
        RenderLayer want = brute_force_layer(splats, 8, 8);
        CHECK(max_layer_diff(got, want) < 1e-6);
    }
}

TEST_CASE("input order does not change the output") {
    std::mt19937 rng(22);
    auto splats = random_scene(rng, 6, 16, 16);
    RenderLayer a = splat_layer(splats, 16, 16);
    std::reverse(splats.begin(), splats.end());
    RenderLayer b = splat_layer(splats, 16, 16);
    CHECK(max_layer_diff(a, b) < 1e-12);
}

TEST_CASE("thread count does not change bits") {
    std::mt19937 rng(23);
    auto splats = random_scene(rng, 20, 48, 33);
    RenderLayer a = splat_layer(splats, 48, 33, 1);
    RenderLayer b = splat_layer(splats, 48, 33, 4);
    CHECK(a.color.data == b.color.data);
    CHECK(a.alpha.data == b.alpha.data);
}

namespace {
RenderLayer const_layer(int h, int w, const Vec3& c, double a) {
    RenderLayer l(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            l.color.set_rgb(y, x, c * a);  // premultiplied
            l.alpha.at(y, x, 0) = a;
        }
    return l;
}
}  // namespace

TEST_CASE("composite hand example") {
    // alpha_hat=0.25, C_hat=(0.25,0,0) premult; alpha=0.5, C=(0.2,0.2,0)
    // premult; body (1,1,1):
    // C* = (0.25,0,0) + 0.75*(0.2,0.2,0) + 0.75*0.5*(1,1,1)
    RenderLayer anchor(2, 2), head(2, 2);
    Image body(2, 2, 3);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) {
            anchor.color.set_rgb(y, x, {0.25, 0, 0});
            anchor.alpha.at(y, x, 0) = 0.25;
            head.color.set_rgb(y, x, {0.2, 0.2, 0});
            head.alpha.at(y, x, 0) = 0.5;
            body.set_rgb(y, x, {1, 1, 1});
        }
    Framebuffer fb = composite(anchor, head, body, {0, 0, 0}, false);
    Vec3 c = fb.rgb.rgb_at(0, 0);
    CHECK(std::abs(c.x - 0.775) < 1e-12);
    CHECK(std::abs(c.y - 0.525) < 1e-12);
    CHECK(std::abs(c.z - 0.375) < 1e-12);
}

TEST_CASE("composite with transparent anchors passes head through") {
    RenderLayer anchor(3, 3);
    RenderLayer head = const_layer(3, 3, {0.2, 0.4, 0.6}, 1.0);
    Framebuffer fb = composite(anchor, head, Image(), {1, 1, 1}, false);
    Vec3 c = fb.rgb.rgb_at(1, 1);
    CHECK(c.x == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(c.z == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("composite empty layers show background or body") {
    RenderLayer anchor(2, 2), head(2, 2);
    Framebuffer fb = composite(anchor, head, Image(), {0.3, 0.2, 0.1}, false);
    CHECK(fb.rgb.rgb_at(1, 0).x == doctest::Approx(0.3));
    Image body(2, 2, 3);
    body.set_rgb(0, 1, {0.9, 0.8, 0.7});
    Framebuffer fb2 = composite(anchor, head, body, {0, 0, 0}, false);
    CHECK(fb2.rgb.rgb_at(0, 1).y == doctest::Approx(0.8));
}

TEST_CASE("composite rejects mismatched sizes") {
    RenderLayer anchor(2, 2), head(3, 3);
    CHECK_THROWS_AS(composite(anchor, head, Image(), {1, 1, 1}), ShapeError);
    RenderLayer head2(2, 2);
    Image body(4, 4, 3);
    CHECK_THROWS_AS(composite(anchor, head2, body, {1, 1, 1}), ShapeError);
}

TEST_CASE("composite clamp") {
    RenderLayer anchor = const_layer(1, 1, {2, 0, 0}, 0.9);
    RenderLayer head(1, 1);
    Framebuffer fb = composite(anchor, head, Image(), {1, 1, 1}, true);
    CHECK(fb.rgb.rgb_at(0, 0).x == doctest::Approx(1.0));
}
