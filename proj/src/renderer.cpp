#include "ghs/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ghs/parallel.hpp"

namespace ghs {

namespace {

struct PreparedSplat {
    int index;      // into the input array
    Vec2 mu;
    Mat2 conic;     // cov2d^-1
    Vec3 rgb;
    double opacity;
    int x0, x1, y0, y1;  // 3-sigma pixel bounds, inclusive
};

struct TileGrid {
    int tiles_x, tiles_y;
    std::vector<std::vector<int>> lists;  // indices into `prepared`, depth order
};

std::vector<PreparedSplat> prepare_and_sort(const std::vector<Splat2D>& splats,
                                            int width, int height) {
    std::vector<int> order(splats.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return splats[a].depth < splats[b].depth;
    });

    std::vector<PreparedSplat> out;
    out.reserve(splats.size());
    for (int idx : order) {
        const Splat2D& s = splats[idx];
        double a = s.cov2d(0, 0), b = s.cov2d(0, 1), c = s.cov2d(1, 1);
        double det = a * c - b * b;
        if (det <= 0) continue;
        double mid = 0.5 * (a + c);
        double lmax = mid + std::sqrt(std::max(0.0, mid * mid - det));
        double radius = std::ceil(3.0 * std::sqrt(lmax));

        PreparedSplat p;
        p.index = idx;
        p.mu = s.mu2d;
        p.conic = {{{c / det, -b / det}, {-b / det, a / det}}};
        p.rgb = s.rgb;
        p.opacity = s.opacity;
        p.x0 = std::max(0, static_cast<int>(std::floor(s.mu2d.x - radius)));
        p.x1 = std::min(width - 1, static_cast<int>(std::ceil(s.mu2d.x + radius)));
        p.y0 = std::max(0, static_cast<int>(std::floor(s.mu2d.y - radius)));
        p.y1 = std::min(height - 1, static_cast<int>(std::ceil(s.mu2d.y + radius)));
        if (p.x0 > p.x1 || p.y0 > p.y1) continue;
        out.push_back(p);
    }
    return out;
}

TileGrid build_tiles(const std::vector<PreparedSplat>& prepared, int width,
                     int height) {
    TileGrid grid;
    grid.tiles_x = (width + kTileSize - 1) / kTileSize;
    grid.tiles_y = (height + kTileSize - 1) / kTileSize;
    grid.lists.resize(static_cast<size_t>(grid.tiles_x) * grid.tiles_y);
    for (size_t pi = 0; pi < prepared.size(); ++pi) {
        const PreparedSplat& p = prepared[pi];
        int tx0 = p.x0 / kTileSize, tx1 = p.x1 / kTileSize;
        int ty0 = p.y0 / kTileSize, ty1 = p.y1 / kTileSize;
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                grid.lists[static_cast<size_t>(ty) * grid.tiles_x + tx].push_back(
                    static_cast<int>(pi));
    }
    return grid;
}

// One processed contribution at a pixel during the forward walk.
struct Contribution {
    int list_pos;  // position inside the tile list
    double alpha;  // clamped alpha-star
    double gauss;  // unclamped kernel value
};

}  // namespace

RenderLayer splat_layer(const std::vector<Splat2D>& splats, int width,
                        int height, int n_threads) {
    RenderLayer layer(height, width);
    auto prepared = prepare_and_sort(splats, width, height);
    TileGrid grid = build_tiles(prepared, width, height);

    int n_tiles = grid.tiles_x * grid.tiles_y;
    parallel_for(n_tiles, n_threads, [&](int t0, int t1) {
        for (int t = t0; t < t1; ++t) {
            const auto& list = grid.lists[t];
            if (list.empty()) continue;
            int tx = t % grid.tiles_x, ty = t / grid.tiles_x;
            int px0 = tx * kTileSize, px1 = std::min(width, px0 + kTileSize);
            int py0 = ty * kTileSize, py1 = std::min(height, py0 + kTileSize);
            for (int y = py0; y < py1; ++y)
                for (int x = px0; x < px1; ++x) {
                    double T = 1.0;
                    Vec3 color{0, 0, 0};
                    for (int pi : list) {
                        const PreparedSplat& p = prepared[pi];
                        if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
                        Vec2 d{x - p.mu.x, y - p.mu.y};
                        double power = -0.5 * (p.conic * d).dot(d);
                        if (power > 0) continue;
                        double a = std::min(kAlphaClamp, p.opacity * std::exp(power));
                        if (a < kMinContribution) continue;
                        color += p.rgb * (a * T);
                        T *= 1.0 - a;
                        if (T < kTransmittanceFloor) break;
                    }
                    layer.color.set_rgb(y, x, color);
                    layer.alpha.at(y, x, 0) = 1.0 - T;
                }
        }
    });
    return layer;
}

std::vector<SplatGrad> splat_layer_backward(const std::vector<Splat2D>& splats,
                                            int width, int height,
                                            const Image& d_color,
                                            const Image& d_alpha,
                                            int n_threads) {
    auto prepared = prepare_and_sort(splats, width, height);
    TileGrid grid = build_tiles(prepared, width, height);
    int n_tiles = grid.tiles_x * grid.tiles_y;

    // Per-tile gradient buffers, merged serially afterwards so the result is
    // independent of the thread count.
    std::vector<std::vector<SplatGrad>> tile_grads(n_tiles);

    parallel_for(n_tiles, n_threads, [&](int t0, int t1) {
        std::vector<Contribution> walk;
        for (int t = t0; t < t1; ++t) {
            const auto& list = grid.lists[t];
            if (list.empty()) continue;
            auto& grads = tile_grads[t];
            grads.resize(list.size());
            int tx = t % grid.tiles_x, ty = t / grid.tiles_x;
            int px0 = tx * kTileSize, px1 = std::min(width, px0 + kTileSize);
            int py0 = ty * kTileSize, py1 = std::min(height, py0 + kTileSize);
            for (int y = py0; y < py1; ++y)
                for (int x = px0; x < px1; ++x) {
                    // Re-run the forward walk for this pixel.
                    walk.clear();
                    double T = 1.0;
                    for (size_t li = 0; li < list.size(); ++li) {
                        const PreparedSplat& p = prepared[list[li]];
                        if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
                        Vec2 d{x - p.mu.x, y - p.mu.y};
                        double power = -0.5 * (p.conic * d).dot(d);
                        if (power > 0) continue;
                        double g = std::exp(power);
                        double a = std::min(kAlphaClamp, p.opacity * g);
                        if (a < kMinContribution) continue;
                        walk.push_back({static_cast<int>(li), a, g});
                        T *= 1.0 - a;
                        if (T < kTransmittanceFloor) break;
                    }
                    if (walk.empty()) continue;

                    Vec3 dC = d_color.rgb_at(y, x);
                    double dA = d_alpha.at(y, x, 0);
                    double T_final = T;

                    // Back-to-front: recover per-splat transmittance and the
                    // suffix of premultiplied color.
                    Vec3 suffix{0, 0, 0};
                    double T_cur = T_final;
                    for (int j = static_cast<int>(walk.size()) - 1; j >= 0; --j) {
                        const Contribution& cb = walk[j];
                        const PreparedSplat& p = prepared[list[cb.list_pos]];
                        double one_minus = 1.0 - cb.alpha;
                        double T_before = T_cur / one_minus;

                        SplatGrad& sg = grads[cb.list_pos];
                        // Color path.
                        sg.d_rgb += dC * (cb.alpha * T_before);
                        double da = dC.dot(p.rgb) * T_before -
                                    dC.dot(suffix) / one_minus;
                        // Layer-alpha path: alpha = 1 - prod(1 - a_j).
                        da += dA * T_final / one_minus;

                        // Through a = min(0.99, opacity * G): zero past clamp.
                        if (p.opacity * cb.gauss < kAlphaClamp) {
                            sg.d_opacity += da * cb.gauss;
                            double dG = da * p.opacity;
                            // G = exp(-0.5 d^T Q d), d = pix - mu.
                            Vec2 dvec{x - p.mu.x, y - p.mu.y};
                            Vec2 qd = p.conic * dvec;
                            double w = dG * cb.gauss;
                            sg.d_mu2d += qd * w;
                            // dL/dQ = -0.5 w d d^T, then Q -> cov via
                            // dCov = -Q dQ Q (Q symmetric).
                            Mat2 dQ{{{-0.5 * w * dvec.x * dvec.x,
                                      -0.5 * w * dvec.x * dvec.y},
                                     {-0.5 * w * dvec.y * dvec.x,
                                      -0.5 * w * dvec.y * dvec.y}}};
                            Mat2 t1 = p.conic * dQ;
                            Mat2 dCov = (t1 * p.conic) * -1.0;
                            for (int r = 0; r < 2; ++r)
                                for (int c = 0; c < 2; ++c)
                                    sg.d_cov2d(r, c) += dCov(r, c);
                        }

                        suffix += p.rgb * (cb.alpha * T_before);
                        T_cur = T_before;
                    }
                }
        }
    });

    // Deterministic merge in tile order.
    std::vector<SplatGrad> out(splats.size());
    for (int t = 0; t < n_tiles; ++t) {
        const auto& list = grid.lists[t];
        const auto& grads = tile_grads[t];
        for (size_t li = 0; li < grads.size(); ++li) {
            const SplatGrad& g = grads[li];
            SplatGrad& o = out[prepared[list[li]].index];
            o.d_rgb += g.d_rgb;
            o.d_opacity += g.d_opacity;
            o.d_mu2d += g.d_mu2d;
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) o.d_cov2d(r, c) += g.d_cov2d(r, c);
        }
    }
    return out;
}

Framebuffer composite(const RenderLayer& anchor, const RenderLayer& head,
                      const Image& body, const Vec3& background,
                      bool clamp_output) {
    int h = head.color.h, w = head.color.w;
    if (anchor.color.h != h || anchor.color.w != w)
        throw ShapeError("composite: layer size mismatch");
    if (body.size() > 0 && (body.h != h || body.w != w))
        throw ShapeError("composite: body size mismatch");

    Framebuffer fb;
    fb.background = background;
    fb.rgb = Image(h, w, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            Vec3 body_c = body.size() > 0 ? body.rgb_at(y, x) : background;
            double ah = anchor.alpha.at(y, x, 0);
            double a = head.alpha.at(y, x, 0);
            Vec3 c = anchor.color.rgb_at(y, x) +
                     (1.0 - ah) * head.color.rgb_at(y, x) +
                     (1.0 - ah) * (1.0 - a) * body_c;
            if (clamp_output)
                c = {std::clamp(c.x, 0.0, 1.0), std::clamp(c.y, 0.0, 1.0),
                     std::clamp(c.z, 0.0, 1.0)};
            fb.rgb.set_rgb(y, x, c);
        }
    return fb;
}

CompositeGrads composite_backward(const RenderLayer& anchor,
                                  const RenderLayer& head, const Image& body,
                                  const Vec3& background, const Image& d_rgb) {
    int h = head.color.h, w = head.color.w;
    CompositeGrads g;
    g.d_anchor_color = Image(h, w, 3);
    g.d_anchor_alpha = Image(h, w, 1);
    g.d_head_color = Image(h, w, 3);
    g.d_head_alpha = Image(h, w, 1);
    g.d_body = Image(h, w, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            Vec3 d = d_rgb.rgb_at(y, x);
            Vec3 body_c = body.size() > 0 ? body.rgb_at(y, x) : background;
            double ah = anchor.alpha.at(y, x, 0);
            double a = head.alpha.at(y, x, 0);
            Vec3 head_c = head.color.rgb_at(y, x);

            g.d_anchor_color.set_rgb(y, x, d);
            g.d_head_color.set_rgb(y, x, d * (1.0 - ah));
            g.d_body.set_rgb(y, x, d * ((1.0 - ah) * (1.0 - a)));
            g.d_anchor_alpha.at(y, x, 0) =
                -d.dot(head_c) - d.dot(body_c) * (1.0 - a);
            g.d_head_alpha.at(y, x, 0) = -d.dot(body_c) * (1.0 - ah);
        }
    return g;
}

}  // namespace ghs
