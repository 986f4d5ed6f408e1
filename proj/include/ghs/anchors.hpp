#pragma once

// Anchor Gaussian lifecycle: initialization from warm-up Gaussians via
// farthest point sampling, fixed texture-space correspondences, parameter
// clamping, and periodic view-frustum cleanup.

#include <vector>

#include "ghs/gaussmodel.hpp"
#include "ghs/image.hpp"
#include "ghs/rig.hpp"

namespace ghs {

constexpr int kDefaultNumAnchors = 1024;
constexpr double kAnchorMinOpacity = 0.05;
constexpr double kAnchorMinScale = 1e-4;
constexpr double kHeadMaskThreshold = 0.5;

struct AnchorSet {
    std::vector<Vec3> mu;          // canonical positions (deformed per frame)
    std::vector<double> scale;     // isotropic; quat is fixed at identity
    std::vector<Vec3> rgb;         // view-independent
    std::vector<double> opacity;
    std::vector<Vec2> target_uv;   // fixed texture-frame correspondences

    int size() const { return static_cast<int>(mu.size()); }
    void remove_indices(const std::vector<int>& sorted_remove);
};

// Deformed world positions of the anchors for a frame (same LBS path as the
// regular Gaussians).
std::vector<Vec3> anchor_world_positions(const AnchorSet& anchors,
                                         const Rig& rig, const DeformNet& net,
                                         const FrameParams& frame);

// Same, from cached per-anchor deform outputs (fast path; no MLP query).
std::vector<Vec3> anchor_world_positions(const AnchorSet& anchors,
                                         const Rig& rig,
                                         const DeformOutputs& cached,
                                         const FrameParams& frame);

// Project deformed anchor positions to pixels; entries behind the near plane
// get valid=false.
struct AnchorProjection {
    std::vector<Vec2> px;
    std::vector<bool> valid;
};
AnchorProjection project_anchor_pixels(const std::vector<Vec3>& world,
                                       const Camera& cam,
                                       double near = kDefaultNear);

// Isotropic splats (cov = scale^2 I) for rasterization.
std::vector<Splat2D> anchor_splats(const AnchorSet& anchors,
                                   const std::vector<Vec3>& world,
                                   const Camera& cam,
                                   double near = kDefaultNear);

// Select n_anchors body Gaussians (projected outside the head mask, inside
// the frustum) by farthest point sampling; derive isotropic scale, DC color
// and the fixed texture correspondences target_uv = projection + (pad, pad).
// Throws InsufficientAnchors when no candidates exist; if fewer than
// n_anchors candidates and allow_reduce, uses all of them.
AnchorSet init_anchors(const GaussianSet& gaussians, const Rig& rig,
                       const DeformNet& net, const FrameParams& canonical,
                       const Image& head_mask, int pad,
                       int n_anchors = kDefaultNumAnchors,
                       bool allow_reduce = true);

// opacity >= 0.05, scale >= 1e-4; run after every optimizer step.
void clamp_anchor_params(AnchorSet& anchors);

// Remove anchors whose canonical-frame projection is behind the camera or
// outside the image rectangle. Returns the number removed.
int frustum_cleanup(AnchorSet& anchors, const Rig& rig, const DeformNet& net,
                    const FrameParams& canonical);

}  // namespace ghs
