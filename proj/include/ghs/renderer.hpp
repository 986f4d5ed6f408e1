#pragma once

// Depth-sorted tile-based alpha-compositing rasterizer for 2D splats, and the
// three-layer hybrid compositor. Tile results are merged in a fixed order so
// output is bit-identical for any thread count.

#include <vector>

#include "ghs/gaussmodel.hpp"
#include "ghs/image.hpp"

namespace ghs {

inline constexpr int kTileSize = 16;
inline constexpr double kAlphaClamp = 0.99;
inline constexpr double kMinContribution = 1.0 / 255.0;
inline constexpr double kTransmittanceFloor = 1e-6;

struct RenderLayer {
    Image color;  // h x w x 3, premultiplied front-to-back accumulation
    Image alpha;  // h x w x 1, 1 - final transmittance

    RenderLayer() = default;
    RenderLayer(int h, int w) : color(h, w, 3), alpha(h, w, 1) {}
};

struct Framebuffer {
    Image rgb;
    Vec3 background{1, 1, 1};
};

struct SplatGrad {
    Vec3 d_rgb;
    double d_opacity = 0;
    Vec2 d_mu2d;
    Mat2 d_cov2d;
};

// Front-to-back compositing of depth-sorted splats (sorting is internal,
// stable, ties broken by input index).
RenderLayer splat_layer(const std::vector<Splat2D>& splats, int width,
                        int height, int n_threads = 1);

// Gradients of a scalar loss w.r.t. each splat's rgb/opacity/mu2d/cov2d given
// per-pixel gradients w.r.t. the layer color and alpha. Recomputes the
// forward walk internally.
std::vector<SplatGrad> splat_layer_backward(const std::vector<Splat2D>& splats,
                                            int width, int height,
                                            const Image& d_color,
                                            const Image& d_alpha,
                                            int n_threads = 1);

// C* = C_anchor + (1-a_anchor) C_head + (1-a_anchor)(1-a_head) C_body.
// When `body` is empty the constant background stands in for the body layer.
// clamp_output applies the final [0,1] clamp (display path only).
Framebuffer composite(const RenderLayer& anchor, const RenderLayer& head,
                      const Image& body, const Vec3& background,
                      bool clamp_output = true);

struct CompositeGrads {
    Image d_anchor_color, d_anchor_alpha;
    Image d_head_color, d_head_alpha;
    Image d_body;
};

CompositeGrads composite_backward(const RenderLayer& anchor,
                                  const RenderLayer& head, const Image& body,
                                  const Vec3& background, const Image& d_rgb);

}  // namespace ghs
