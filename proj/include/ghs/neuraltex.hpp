#pragma once

// Canonical body texture (coarse RGB + latent features), the pose-conditioned
// warp field MLP_w and the fine-color network MLP_f, plus the batched body
// layer renderer used during fitting.

#include <random>
#include <vector>

#include "ghs/coremath.hpp"
#include "ghs/image.hpp"
#include "ghs/mlp.hpp"
#include "ghs/rig.hpp"

namespace ghs {

constexpr int kTexPad = 50;
constexpr int kTexLatentDim = 32;
constexpr int kNumLandmarks = 4;  // nose, neck, L shoulder, R shoulder
constexpr int kNeckJoint = 1;
constexpr int kHeadJoint = 2;

struct NeuralTexture {
    int height = 0, width = 0;  // image-facing size H, W
    int pad = kTexPad;
    int latent_dim = kTexLatentDim;
    std::vector<double> coarse;  // (H+2P) * (W+2P) * 3, white init
    std::vector<double> latent;  // (H+2P) * (W+2P) * D_t, uniform [0,1] init

    int tex_h() const { return height + 2 * pad; }
    int tex_w() const { return width + 2 * pad; }

    static NeuralTexture make(int height, int width, std::mt19937& rng,
                              int pad = kTexPad, int latent_dim = kTexLatentDim);
};

struct WarpNet {
    Mlp net;
    static WarpNet make(std::mt19937& rng, int width = 128, int n_hidden = 4);
};

struct FineNet {
    Mlp net;  // linear output; tanh and 0.5 scale applied by callers
    static FineNet make(int latent_dim, std::mt19937& rng, int width = 128,
                        int n_hidden = 4);
};

// Shared per-frame conditioning: gamma(theta_head/neck) (L=2), gamma(t) (L=2),
// gamma(x_ldmk) (L=10). Pixel and landmark coordinates are normalized to
// [-1,1] over the image extent before encoding; t_norm is pre-normalized.
int frame_encoding_dim();
std::vector<double> encode_frame(const FrameParams& frame, int img_w, int img_h,
                                 double t_norm);

// Pixel encoding gamma(x_v) with L=10 on normalized coordinates.
int pixel_encoding_dim();
void encode_pixel(const Vec2& view_xy, int img_w, int img_h,
                  std::vector<double>& out);
// d(loss)/d(view_xy) given d(loss)/d(encoding), through the [-1,1]
// normalization.
Vec2 encode_pixel_backward(const Vec2& view_xy, int img_w, int img_h,
                           const double* d_enc);

int warp_input_dim();
int fine_input_dim(int latent_dim);

// x_t = x_v + (P, P) + MLP_w(gamma(x_v), frame encoding).
Vec2 warp(const Vec2& view_xy, const std::vector<double>& frame_enc, int img_w,
          int img_h, int pad, const WarpNet& wnet);

// C^t(x_v) = T_c(x_t) + 0.5 * tanh(MLP_f(T_f(x_t), frame encoding)).
// Unclamped; the final image write clamps.
Vec3 textured_color(const Vec2& view_xy, const std::vector<double>& frame_enc,
                    int img_w, int img_h, const NeuralTexture& tex,
                    const WarpNet& wnet, const FineNet& fnet);

// Batched body layer over the whole image. With stride > 1 the networks run
// on a coarse pixel grid and the warp / fine color are bilinearly
// interpolated between grid nodes; stride 1 evaluates every pixel.
struct BodyTexRender {
    Image color;  // H x W x 3, C^t per pixel
    Image warp;   // H x W x 2, interpolated Delta_x per pixel

    // caches for the backward pass
    int stride = 1;
    std::vector<int> node_x, node_y;      // node pixel coordinates
    Eigen::MatrixXd node_warp;            // n_nodes x 2
    Eigen::MatrixXd node_tanh;            // n_nodes x 3, tanh(MLP_f output)
    Mlp::Cache warp_cache, fine_cache;
};

BodyTexRender render_body_texture(const NeuralTexture& tex, const WarpNet& wnet,
                                  const FineNet& fnet,
                                  const std::vector<double>& frame_enc,
                                  int img_w, int img_h, int stride = 1);

struct BodyTexGrads {
    std::vector<double> d_coarse, d_latent;
    MlpGrads d_warp, d_fine;
};

// d_color is dL/dC^t (H x W x 3); d_warp is dL/dDelta_x (H x W x 2, e.g. from
// the warp regularizer). Accumulates into `grads` (must be pre-sized).
void render_body_texture_backward(const NeuralTexture& tex, const WarpNet& wnet,
                                  const FineNet& fnet,
                                  const std::vector<double>& frame_enc,
                                  const BodyTexRender& fwd, const Image& d_color,
                                  const Image& d_warp, BodyTexGrads& grads);

BodyTexGrads make_body_tex_grads(const NeuralTexture& tex, const WarpNet& wnet,
                                 const FineNet& fnet);

// Flatten the fine color into the coarse texture at one conditioning frame:
// baked(x_t) = T_c(x_t) + 0.5 * tanh(MLP_f(T_f(x_t), enc)) for every texel.
Image bake_flat_texture(const NeuralTexture& tex, const FineNet& fnet,
                        const std::vector<double>& frame_enc);

}  // namespace ghs
