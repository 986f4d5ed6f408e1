#include "ghs/anchors.hpp"

#include <algorithm>
#include <cstdio>

namespace ghs {

namespace {

constexpr double kShDc = 0.28209479177387814;

std::vector<Vec3> lbs_positions(const std::vector<Vec3>& mu, const Rig& rig,
                                const DeformOutputs& out,
                                const FrameParams& frame) {
    SkinningFrame sk = compute_skinning(rig, frame);
    std::vector<Vec3> world(mu.size());
    for (size_t i = 0; i < mu.size(); ++i) {
        LbsResult r = lbs_transform(rig, frame.psi, sk, mu[i],
                                    out.expr.row(i).data(), out.pose.row(i).data(),
                                    out.lbs_w.row(i).data());
        world[i] = r.R * mu[i] + r.T;
    }
    return world;
}

}  // namespace

void AnchorSet::remove_indices(const std::vector<int>& sorted_remove) {
    if (sorted_remove.empty()) return;
    size_t out = 0, r = 0;
    for (size_t i = 0; i < mu.size(); ++i) {
        if (r < sorted_remove.size() && static_cast<int>(i) == sorted_remove[r]) {
            ++r;
            continue;
        }
        mu[out] = mu[i];
        scale[out] = scale[i];
        rgb[out] = rgb[i];
        opacity[out] = opacity[i];
        target_uv[out] = target_uv[i];
        ++out;
    }
    mu.resize(out);
    scale.resize(out);
    rgb.resize(out);
    opacity.resize(out);
    target_uv.resize(out);
}

std::vector<Vec3> anchor_world_positions(const AnchorSet& anchors,
                                         const Rig& rig, const DeformNet& net,
                                         const FrameParams& frame) {
    int n = anchors.size();
    Eigen::MatrixXd X(n, 3);
    for (int i = 0; i < n; ++i)
        X.row(i) << anchors.mu[i].x, anchors.mu[i].y, anchors.mu[i].z;
    DeformOutputs out = deform_net_eval(net, X);
    return lbs_positions(anchors.mu, rig, out, frame);
}

std::vector<Vec3> anchor_world_positions(const AnchorSet& anchors,
                                         const Rig& rig,
                                         const DeformOutputs& cached,
                                         const FrameParams& frame) {
    if (cached.lbs_w.rows() != anchors.size())
        throw ShapeError("anchor_world_positions: cached outputs size mismatch");
    return lbs_positions(anchors.mu, rig, cached, frame);
}

AnchorProjection project_anchor_pixels(const std::vector<Vec3>& world,
                                       const Camera& cam, double near) {
    AnchorProjection p;
    p.px.resize(world.size());
    p.valid.resize(world.size());
    for (size_t i = 0; i < world.size(); ++i) {
        Vec3 c = cam.to_camera(world[i]);
        p.valid[i] = c.z > near;
        p.px[i] = p.valid[i] ? cam.project(c) : Vec2{0, 0};
    }
    return p;
}

std::vector<Splat2D> anchor_splats(const AnchorSet& anchors,
                                   const std::vector<Vec3>& world,
                                   const Camera& cam, double near) {
    std::vector<Splat2D> splats;
    splats.reserve(world.size());
    for (size_t i = 0; i < world.size(); ++i) {
        Vec3 c = cam.to_camera(world[i]);
        double s2 = anchors.scale[i] * anchors.scale[i];
        auto proj = project_gaussian(c, Mat3::diag(s2, s2, s2), cam, near);
        if (!proj) continue;
        splats.push_back({proj->mu2d, proj->cov2d, proj->depth, anchors.rgb[i],
                          anchors.opacity[i]});
    }
    return splats;
}

AnchorSet init_anchors(const GaussianSet& gaussians, const Rig& rig,
                       const DeformNet& net, const FrameParams& canonical,
                       const Image& head_mask, int pad, int n_anchors,
                       bool allow_reduce) {
    int n = gaussians.size();
    Eigen::MatrixXd X(n, 3);
    for (int i = 0; i < n; ++i)
        X.row(i) << gaussians.mu[i].x, gaussians.mu[i].y, gaussians.mu[i].z;
    DeformOutputs out = deform_net_eval(net, X);
    std::vector<Vec3> world = lbs_positions(gaussians.mu, rig, out, canonical);
    AnchorProjection proj = project_anchor_pixels(world, canonical.cam);

    // Candidates: body Gaussians, i.e. visible ones outside the head mask.
    std::vector<int> cand;
    for (int i = 0; i < n; ++i) {
        if (!proj.valid[i] || !canonical.cam.in_image(proj.px[i])) continue;
        int mx = std::clamp(static_cast<int>(std::lround(proj.px[i].x)), 0,
                            head_mask.w - 1);
        int my = std::clamp(static_cast<int>(std::lround(proj.px[i].y)), 0,
                            head_mask.h - 1);
        if (head_mask.at(my, mx, 0) > kHeadMaskThreshold) continue;
        cand.push_back(i);
    }
    if (cand.empty())
        throw InsufficientAnchors("init_anchors: no body Gaussians outside the head mask");
    if (static_cast<int>(cand.size()) < n_anchors) {
        if (!allow_reduce)
            throw InsufficientAnchors("init_anchors: only " +
                                      std::to_string(cand.size()) +
                                      " candidates for " +
                                      std::to_string(n_anchors) + " anchors");
        std::fprintf(stderr,
                     "warning: init_anchors: reducing anchor count to %zu\n",
                     cand.size());
        n_anchors = static_cast<int>(cand.size());
    }

    // FPS over canonical positions, seeded at the most shoulder-ward
    // candidate (largest projected y; image y grows downward).
    std::vector<Vec3> cand_mu(cand.size());
    int seed = 0;
    for (size_t k = 0; k < cand.size(); ++k) {
        cand_mu[k] = gaussians.mu[cand[k]];
        if (proj.px[cand[k]].y > proj.px[cand[seed]].y) seed = static_cast<int>(k);
    }
    std::vector<int> picked = farthest_point_sample(cand_mu, n_anchors, seed);

    AnchorSet a;
    int stride = gaussians.sh_stride();
    for (int k : picked) {
        int i = cand[k];
        a.mu.push_back(gaussians.mu[i]);
        a.scale.push_back((gaussians.scale[i].x + gaussians.scale[i].y +
                           gaussians.scale[i].z) / 3.0);
        const double* sh = &gaussians.sh[static_cast<size_t>(i) * stride];
        a.rgb.push_back({std::max(0.0, 0.5 + kShDc * sh[0]),
                         std::max(0.0, 0.5 + kShDc * sh[1]),
                         std::max(0.0, 0.5 + kShDc * sh[2])});
        a.opacity.push_back(gaussians.opacity[i]);
        a.target_uv.push_back(proj.px[i] + Vec2{double(pad), double(pad)});
    }
    clamp_anchor_params(a);
    return a;
}

void clamp_anchor_params(AnchorSet& anchors) {
    for (auto& o : anchors.opacity) o = std::max(o, kAnchorMinOpacity);
    for (auto& s : anchors.scale) s = std::max(s, kAnchorMinScale);
}

int frustum_cleanup(AnchorSet& anchors, const Rig& rig, const DeformNet& net,
                    const FrameParams& canonical) {
    std::vector<Vec3> world = anchor_world_positions(anchors, rig, net, canonical);
    AnchorProjection proj = project_anchor_pixels(world, canonical.cam);
    std::vector<int> remove;
    for (int i = 0; i < anchors.size(); ++i)
        if (!proj.valid[i] || !canonical.cam.in_image(proj.px[i]))
            remove.push_back(i);
    anchors.remove_indices(remove);
    return static_cast<int>(remove.size());
}

}  // namespace ghs
