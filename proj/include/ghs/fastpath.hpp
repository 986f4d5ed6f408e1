#pragma once

// MLP-free baked inference: cached deformation-net outputs, a flat baked body
// texture, RANSAC-filtered anchor correspondences and per-frame homography
// rendering, plus the cross-reenactment Euclidean alignment variant.

#include <random>
#include <string>
#include <vector>

#include "ghs/avatar.hpp"
#include "ghs/renderer.hpp"

namespace ghs {

constexpr double kRansacThresholdPx = 3.0;
constexpr int kRansacIters = 500;
constexpr double kRansacOutlierFraction = 0.5;
constexpr int kRansacMaxFrames = 100;
constexpr double kHomographyAnisotropyWarn = 5.0;

// Everything needed to render without touching a network.
struct BakedAvatar {
    Rig rig;
    GaussianSet gaussians;
    DeformOutputs head_deform;    // cached per-Gaussian MLP_d outputs
    AnchorSet anchors;            // RANSAC-filtered, refreshed target_uv
    DeformOutputs anchor_deform;  // cached per-anchor MLP_d outputs
    Image flat_tex;               // tex_h x tex_w x 3, background-whitened
    int pad = kTexPad;
    int canonical_frame = 0;
};

// Flatten coarse + fine texture at the canonical conditioning; texels whose
// background-mask value is below 0.5 become white. An empty mask skips the
// cleaning with a warning.
Image bake_texture(const NeuralTexture& tex, const FineNet& fnet,
                   const std::vector<double>& canonical_enc,
                   const Image& bg_mask);

// target_uv := warp(projected canonical pixel); anchors outside the canonical
// frustum are dropped. Throws InsufficientAnchors when < 4 survive.
AnchorSet refresh_correspondences(const AnchorSet& anchors, const Rig& rig,
                                  const DeformNet& net, const WarpNet& wnet,
                                  const FrameParams& canonical,
                                  const std::vector<double>& canonical_enc,
                                  int pad);

// One RANSAC pass between point correspondences; returns the inlier flags of
// the best model (used per frame by ransac_filter and by tests directly).
std::vector<bool> ransac_homography_inliers(const std::vector<Vec2>& src,
                                            const std::vector<Vec2>& dst,
                                            std::mt19937& rng,
                                            double threshold_px = kRansacThresholdPx,
                                            int iters = kRansacIters);

// Flags anchors that are homography outliers in more than `outlier_fraction`
// of the sampled frames (at most kRansacMaxFrames, without replacement).
// Returns the filtered set; `removed` (optional) receives the dropped indices.
AnchorSet ransac_filter(const AnchorSet& anchors, const Rig& rig,
                        const DeformOutputs& anchor_deform,
                        const std::vector<FrameParams>& frames,
                        std::mt19937& rng,
                        double threshold_px = kRansacThresholdPx,
                        int iters = kRansacIters,
                        double outlier_fraction = kRansacOutlierFraction,
                        std::vector<int>* removed = nullptr);

// Full bake: flat texture, refreshed + filtered anchors, cached MLP_d outputs.
BakedAvatar bake_avatar(const AvatarModel& model,
                        const std::vector<FrameParams>& train_frames,
                        int canonical_index,
                        const std::vector<double>& canonical_enc,
                        const Image& bg_mask, unsigned seed);

struct FastRenderState {
    Mat3 H = Mat3::identity();
    bool has_H = false;
};

// Cached-LBS head splats + SVD homography texture warp, anchor alpha = 0.
// Performs zero MLP queries. A degenerate homography falls back to the
// previous frame's (identity on the first) with a warning.
Framebuffer render_fast(const BakedAvatar& baked, const FrameParams& frame,
                        FastRenderState* state = nullptr, int threads = 1);

struct Rigid2D {
    Mat2 R = Mat2::identity();
    Vec2 t;
    Vec2 apply(const Vec2& p) const { return R * p + t; }
};

// Orthogonal Procrustes (rotation + translation, no scale) fitting src onto
// dst. det(R) = +1. Throws InsufficientAnchors below 2 points.
Rigid2D euclidean_align(const std::vector<Vec2>& src,
                        const std::vector<Vec2>& dst);

// .baked container, magic "GBKD".
void save_baked(const std::string& path, const BakedAvatar& baked);
BakedAvatar load_baked(const std::string& path);

}  // namespace ghs
