#include "ghs/fastpath.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ghs/asset.hpp"

namespace ghs {

Image bake_texture(const NeuralTexture& tex, const FineNet& fnet,
                   const std::vector<double>& canonical_enc,
                   const Image& bg_mask) {
    Image flat = bake_flat_texture(tex, fnet, canonical_enc);
    if (bg_mask.data.empty()) {
        std::fprintf(stderr,
                     "warning: bake_texture: no background mask, texture "
                     "not cleaned\n");
        return flat;
    }
    if (bg_mask.h != flat.h || bg_mask.w != flat.w)
        throw ShapeError("bake_texture: mask size mismatch");
    for (int y = 0; y < flat.h; ++y)
        for (int x = 0; x < flat.w; ++x)
            if (bg_mask.at(y, x, 0) < 0.5) flat.set_rgb(y, x, {1, 1, 1});
    return flat;
}

AnchorSet refresh_correspondences(const AnchorSet& anchors, const Rig& rig,
                                  const DeformNet& net, const WarpNet& wnet,
                                  const FrameParams& canonical,
                                  const std::vector<double>& canonical_enc,
                                  int pad) {
    const Camera& cam = canonical.cam;
    std::vector<Vec3> world = anchor_world_positions(anchors, rig, net, canonical);
    AnchorProjection proj = project_anchor_pixels(world, cam);
    AnchorSet out = anchors;
    std::vector<int> drop;
    for (int i = 0; i < anchors.size(); ++i) {
        if (!proj.valid[i] || !cam.in_image(proj.px[i])) {
            drop.push_back(i);
            continue;
        }
        out.target_uv[i] = warp(proj.px[i], canonical_enc, cam.width,
                                cam.height, pad, wnet);
    }
    out.remove_indices(drop);
    if (out.size() < 4)
        throw InsufficientAnchors(
            "refresh_correspondences: fewer than 4 anchors survive");
    return out;
}

std::vector<bool> ransac_homography_inliers(const std::vector<Vec2>& src,
                                            const std::vector<Vec2>& dst,
                                            std::mt19937& rng,
                                            double threshold_px, int iters) {
    int n = static_cast<int>(src.size());
    if (n < 4 || dst.size() != src.size())
        throw DegenerateConfiguration(
            "ransac_homography_inliers: need >= 4 correspondences");
    double t2 = threshold_px * threshold_px;
    std::uniform_int_distribution<int> pick(0, n - 1);

    auto flag_inliers = [&](const Mat3& H, std::vector<bool>& in) {
        int count = 0;
        in.assign(n, false);
        for (int i = 0; i < n; ++i) {
            Vec2 p = apply_homography(H, src[i]);
            if ((p - dst[i]).squared_norm() <= t2) {
                in[i] = true;
                ++count;
            }
        }
        return count;
    };

    std::vector<bool> best;
    int best_count = 0;
    std::vector<Vec2> s4(4), d4(4);
    for (int it = 0; it < iters && best_count < n; ++it) {
        int idx[4];
        idx[0] = pick(rng);
        for (int k = 1; k < 4; ++k) {
            bool dup;
            do {
                idx[k] = pick(rng);
                dup = false;
                for (int j = 0; j < k; ++j) dup |= idx[j] == idx[k];
            } while (dup);
        }
        for (int k = 0; k < 4; ++k) {
            s4[k] = src[idx[k]];
            d4[k] = dst[idx[k]];
        }
        Mat3 H;
        try {
            H = svd_least_squares_homography(s4, d4);
        } catch (const DegenerateConfiguration&) {
            continue;
        }
        std::vector<bool> in;
        int count = flag_inliers(H, in);
        if (count > best_count) {
            best_count = count;
            best = std::move(in);
        }
    }
    if (best_count < 4)
        throw DegenerateConfiguration(
            "ransac_homography_inliers: no valid model found");

    // Refit on the consensus set and reclassify once.
    std::vector<Vec2> si, di;
    for (int i = 0; i < n; ++i)
        if (best[i]) {
            si.push_back(src[i]);
            di.push_back(dst[i]);
        }
    try {
        Mat3 H = svd_least_squares_homography(si, di);
        std::vector<bool> in;
        if (flag_inliers(H, in) >= best_count) best = std::move(in);
    } catch (const DegenerateConfiguration&) {
    }
    return best;
}

AnchorSet ransac_filter(const AnchorSet& anchors, const Rig& rig,
                        const DeformOutputs& anchor_deform,
                        const std::vector<FrameParams>& frames,
                        std::mt19937& rng, double threshold_px, int iters,
                        double outlier_fraction, std::vector<int>* removed) {
    int n = anchors.size();
    std::vector<const FrameParams*> use;
    if (static_cast<int>(frames.size()) > kRansacMaxFrames) {
        std::vector<const FrameParams*> all;
        for (const auto& f : frames) all.push_back(&f);
        std::sample(all.begin(), all.end(), std::back_inserter(use),
                    kRansacMaxFrames, rng);
    } else {
        for (const auto& f : frames) use.push_back(&f);
    }

    std::vector<int> outlier_count(n, 0);
    int frames_used = 0;
    for (const FrameParams* fp : use) {
        std::vector<Vec3> world =
            anchor_world_positions(anchors, rig, anchor_deform, *fp);
        AnchorProjection proj = project_anchor_pixels(world, fp->cam);
        std::vector<int> valid_idx;
        std::vector<Vec2> src, dst;
        for (int i = 0; i < n; ++i)
            if (proj.valid[i]) {
                valid_idx.push_back(i);
                src.push_back(proj.px[i]);
                dst.push_back(anchors.target_uv[i]);
            }
        std::vector<bool> inlier;
        try {
            inlier = ransac_homography_inliers(src, dst, rng, threshold_px,
                                               iters);
        } catch (const DegenerateConfiguration&) {
            std::fprintf(stderr,
                         "warning: ransac_filter: degenerate frame %d "
                         "skipped\n",
                         fp->index);
            continue;
        }
        ++frames_used;
        std::vector<bool> in_full(n, false);
        for (size_t k = 0; k < valid_idx.size(); ++k)
            in_full[valid_idx[k]] = inlier[k];
        for (int i = 0; i < n; ++i)
            if (!in_full[i]) ++outlier_count[i];
    }

    std::vector<int> drop;
    if (frames_used > 0)
        for (int i = 0; i < n; ++i)
            if (outlier_count[i] > outlier_fraction * frames_used)
                drop.push_back(i);
    AnchorSet out = anchors;
    out.remove_indices(drop);
    if (removed) *removed = std::move(drop);
    return out;
}

BakedAvatar bake_avatar(const AvatarModel& model,
                        const std::vector<FrameParams>& train_frames,
                        int canonical_index,
                        const std::vector<double>& canonical_enc,
                        const Image& bg_mask, unsigned seed) {
    BakedAvatar b;
    b.rig = model.rig;
    b.gaussians = model.gaussians;
    b.pad = model.tex.pad;
    b.canonical_frame = canonical_index;
    b.flat_tex = bake_texture(model.tex, model.fnet, canonical_enc, bg_mask);

    const FrameParams& canonical = train_frames.at(canonical_index);
    AnchorSet refreshed =
        refresh_correspondences(model.anchors, model.rig, model.deform,
                                model.wnet, canonical, canonical_enc, b.pad);

    std::mt19937 rng(seed);
    Eigen::MatrixXd Xa(refreshed.size(), 3);
    for (int i = 0; i < refreshed.size(); ++i)
        Xa.row(i) << refreshed.mu[i].x, refreshed.mu[i].y, refreshed.mu[i].z;
    DeformOutputs ad = deform_net_eval(model.deform, Xa);
    std::vector<int> removed;
    b.anchors = ransac_filter(refreshed, model.rig, ad, train_frames, rng,
                              kRansacThresholdPx, kRansacIters,
                              kRansacOutlierFraction, &removed);
    if (b.anchors.size() < 4)
        throw InsufficientAnchors("bake_avatar: fewer than 4 anchors survive");

    Eigen::MatrixXd Xa2(b.anchors.size(), 3);
    for (int i = 0; i < b.anchors.size(); ++i)
        Xa2.row(i) << b.anchors.mu[i].x, b.anchors.mu[i].y, b.anchors.mu[i].z;
    b.anchor_deform = deform_net_eval(model.deform, Xa2);

    Eigen::MatrixXd Xg(model.gaussians.size(), 3);
    for (int i = 0; i < model.gaussians.size(); ++i)
        Xg.row(i) << model.gaussians.mu[i].x, model.gaussians.mu[i].y,
            model.gaussians.mu[i].z;
    b.head_deform = deform_net_eval(model.deform, Xg);
    return b;
}

Framebuffer render_fast(const BakedAvatar& b, const FrameParams& frame,
                        FastRenderState* state, int threads) {
    const Camera& cam = frame.cam;
    SkinningFrame sk = compute_skinning(b.rig, frame);

    // Head layer from the cached deformation outputs.
    std::vector<Splat2D> splats;
    int stride = b.gaussians.sh_stride();
    std::vector<double> sh(stride);
    for (int i = 0; i < b.gaussians.size(); ++i) {
        LbsResult r = lbs_transform(b.rig, frame.psi, sk, b.gaussians.mu[i],
                                    b.head_deform.expr.row(i).data(),
                                    b.head_deform.pose.row(i).data(),
                                    b.head_deform.lbs_w.row(i).data());
        Vec3 mu_w = r.R * b.gaussians.mu[i] + r.T;
        Mat3 cov = build_covariance(b.gaussians.scale[i], b.gaussians.quat[i]);
        Mat3 cov_w = r.R * cov * r.R.transpose();
        Vec3 mu_cam = cam.to_camera(mu_w);
        Mat3 cov_cam =
            cam.world_to_cam_rot * cov_w * cam.world_to_cam_rot.transpose();
        auto proj = project_gaussian(mu_cam, cov_cam, cam);
        if (!proj) continue;
        std::copy_n(&b.gaussians.sh[static_cast<size_t>(i) * stride], stride,
                    sh.begin());
        splats.push_back({proj->mu2d, proj->cov2d, proj->depth,
                          sh_to_rgb(sh, mu_cam.normalized()),
                          b.gaussians.opacity[i]});
    }
    RenderLayer head = splat_layer(splats, cam.width, cam.height, threads);

    // Homography from anchor pixels to texture correspondences.
    std::vector<Vec3> world =
        anchor_world_positions(b.anchors, b.rig, b.anchor_deform, frame);
    AnchorProjection proj = project_anchor_pixels(world, cam);
    std::vector<Vec2> src, dst;
    for (int i = 0; i < b.anchors.size(); ++i)
        if (proj.valid[i]) {
            src.push_back(proj.px[i]);
            dst.push_back(b.anchors.target_uv[i]);
        }
    Mat3 H;
    bool ok = false;
    if (src.size() >= 4) {
        try {
            H = svd_least_squares_homography(src, dst);
            ok = std::abs(H.det()) > 1e-10;
        } catch (const DegenerateConfiguration&) {
        }
    }
    if (!ok) {
        H = state && state->has_H ? state->H : Mat3::identity();
        std::fprintf(stderr,
                     "warning: render_fast: degenerate homography on frame "
                     "%d, reusing previous\n",
                     frame.index);
    } else if (state) {
        state->H = H;
        state->has_H = true;
    }

    {
        Eigen::Matrix2d A;
        A << H(0, 0), H(0, 1), H(1, 0), H(1, 1);
        Eigen::JacobiSVD<Eigen::Matrix2d> svd(A);
        double s0 = svd.singularValues()(0), s1 = svd.singularValues()(1);
        if (s1 <= 1e-12 || s0 / s1 > kHomographyAnisotropyWarn)
            std::fprintf(stderr,
                         "warning: render_fast: near-degenerate pose on frame "
                         "%d (homography anisotropy %.2f)\n",
                         frame.index, s1 > 0 ? s0 / s1 : 0.0);
    }

    // Inverse-mapped texture lookup: iterate destination pixels, sample the
    // flat texture at H * x_v.
    Image body(cam.height, cam.width, 3);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            Vec2 t = apply_homography(H, {double(x), double(y)});
            double rgb[3];
            bilinear_sample(b.flat_tex.data.data(), b.flat_tex.h, b.flat_tex.w,
                            3, t, rgb);
            body.set_rgb(y, x, {rgb[0], rgb[1], rgb[2]});
        }

    return composite(RenderLayer(cam.height, cam.width), head, body,
                     Vec3{1, 1, 1}, true);
}

Rigid2D euclidean_align(const std::vector<Vec2>& src,
                        const std::vector<Vec2>& dst) {
    if (src.size() < 2 || src.size() != dst.size())
        throw InsufficientAnchors("euclidean_align: need >= 2 point pairs");
    int n = static_cast<int>(src.size());
    Vec2 cs{0, 0}, cd{0, 0};
    for (int i = 0; i < n; ++i) {
        cs += src[i];
        cd += dst[i];
    }
    cs = cs / n;
    cd = cd / n;
    Eigen::Matrix2d M = Eigen::Matrix2d::Zero();
    for (int i = 0; i < n; ++i) {
        Vec2 a = src[i] - cs, b = dst[i] - cd;
        M(0, 0) += b.x * a.x;
        M(0, 1) += b.x * a.y;
        M(1, 0) += b.y * a.x;
        M(1, 1) += b.y * a.y;
    }
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(
        M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix2d U = svd.matrixU(), V = svd.matrixV();
    Eigen::Matrix2d D = Eigen::Matrix2d::Identity();
    D(1, 1) = (U * V.transpose()).determinant() >= 0 ? 1.0 : -1.0;
    Eigen::Matrix2d R = U * D * V.transpose();
    Rigid2D out;
    out.R(0, 0) = R(0, 0);
    out.R(0, 1) = R(0, 1);
    out.R(1, 0) = R(1, 0);
    out.R(1, 1) = R(1, 1);
    Vec2 Rc = out.R * cs;
    out.t = cd - Rc;
    return out;
}

// ---------------------------------------------------------------------------
// .baked container

namespace {

void deform_to_blobs(BlobFile& bf, const std::string& prefix,
                     const DeformOutputs& d) {
    auto put = [&](const std::string& name, const Eigen::MatrixXd& M) {
        std::vector<double> v(M.size());
        for (int r = 0; r < M.rows(); ++r)
            for (int c = 0; c < M.cols(); ++c) v[r * M.cols() + c] = M(r, c);
        bf.blobs[prefix + name] = to_f32(v);
    };
    put("_expr", d.expr);
    put("_pose", d.pose);
    put("_lbs", d.lbs_w);
}

DeformOutputs deform_from_blobs(const BlobFile& bf, const std::string& prefix,
                                int rows, int ne3, int np27, int nj) {
    auto get = [&](const std::string& name, int cols) {
        auto v = to_f64(bf.blobs.at(prefix + name));
        if (static_cast<int>(v.size()) != rows * cols)
            throw CorruptAsset("baked: blob size mismatch in " + prefix + name);
        Eigen::MatrixXd M(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) M(r, c) = v[r * cols + c];
        return M;
    };
    DeformOutputs d;
    d.expr = get("_expr", ne3);
    d.pose = get("_pose", np27);
    d.lbs_w = get("_lbs", nj);
    return d;
}

}  // namespace

void save_baked(const std::string& path, const BakedAvatar& b) {
    BlobFile bf;
    bf.manifest["kind"] = "baked";
    bf.manifest["pad"] = b.pad;
    bf.manifest["canonical_frame"] = b.canonical_frame;

    const Rig& rig = b.rig;
    bf.manifest["n_joints"] = rig.n_joints;
    bf.manifest["n_expr"] = rig.n_expr;
    bf.manifest["n_pose"] = rig.n_pose;
    bf.manifest["parents"] = rig.parents;
    std::vector<double> tmp;
    for (const auto& j : rig.rest_joints) tmp.insert(tmp.end(), {j.x, j.y, j.z});
    bf.blobs["rig_rest_joints"] = to_f32(tmp);
    tmp.clear();
    for (int r = 0; r < rig.joint_regressor.rows(); ++r)
        for (int c = 0; c < rig.joint_regressor.cols(); ++c)
            tmp.push_back(rig.joint_regressor(r, c));
    bf.blobs["rig_joint_regressor"] = to_f32(tmp);

    bf.manifest["n_gaussians"] = b.gaussians.size();
    bf.manifest["sh_bases"] = b.gaussians.sh_bases;
    tmp.clear();
    for (const auto& v : b.gaussians.mu) tmp.insert(tmp.end(), {v.x, v.y, v.z});
    bf.blobs["g_mu"] = to_f32(tmp);
    tmp.clear();
    for (const auto& v : b.gaussians.scale)
        tmp.insert(tmp.end(), {v.x, v.y, v.z});
    bf.blobs["g_scale"] = to_f32(tmp);
    tmp.clear();
    for (const auto& q : b.gaussians.quat)
        tmp.insert(tmp.end(), {q.w, q.x, q.y, q.z});
    bf.blobs["g_quat"] = to_f32(tmp);
    bf.blobs["g_opacity"] = to_f32(b.gaussians.opacity);
    bf.blobs["g_sh"] = to_f32(b.gaussians.sh);

    bf.manifest["n_anchors"] = b.anchors.size();
    tmp.clear();
    for (const auto& v : b.anchors.mu) tmp.insert(tmp.end(), {v.x, v.y, v.z});
    bf.blobs["a_mu"] = to_f32(tmp);
    bf.blobs["a_scale"] = to_f32(b.anchors.scale);
    tmp.clear();
    for (const auto& v : b.anchors.rgb) tmp.insert(tmp.end(), {v.x, v.y, v.z});
    bf.blobs["a_rgb"] = to_f32(tmp);
    bf.blobs["a_opacity"] = to_f32(b.anchors.opacity);
    tmp.clear();
    for (const auto& v : b.anchors.target_uv) tmp.insert(tmp.end(), {v.x, v.y});
    bf.blobs["a_target_uv"] = to_f32(tmp);

    deform_to_blobs(bf, "hd", b.head_deform);
    deform_to_blobs(bf, "ad", b.anchor_deform);

    bf.manifest["tex_h"] = b.flat_tex.h;
    bf.manifest["tex_w"] = b.flat_tex.w;
    bf.blobs["flat_tex"] = to_f32(b.flat_tex.data);

    bf.save(path, "GBKD");
}

BakedAvatar load_baked(const std::string& path) {
    BlobFile bf = BlobFile::load(path, "GBKD");
    BakedAvatar b;
    b.pad = bf.manifest.at("pad");
    b.canonical_frame = bf.manifest.at("canonical_frame");

    Rig& rig = b.rig;
    rig.n_joints = bf.manifest.at("n_joints");
    rig.n_expr = bf.manifest.at("n_expr");
    rig.n_pose = bf.manifest.at("n_pose");
    rig.parents = bf.manifest.at("parents").get<std::vector<int>>();
    auto rest = to_f64(bf.blobs.at("rig_rest_joints"));
    for (int j = 0; j < rig.n_joints; ++j)
        rig.rest_joints.push_back({rest[3 * j], rest[3 * j + 1], rest[3 * j + 2]});
    auto reg = to_f64(bf.blobs.at("rig_joint_regressor"));
    rig.joint_regressor = Eigen::MatrixXd(3 * rig.n_joints, rig.n_expr);
    for (int r = 0; r < rig.joint_regressor.rows(); ++r)
        for (int c = 0; c < rig.n_expr; ++c)
            rig.joint_regressor(r, c) = reg[r * rig.n_expr + c];

    size_t ng = bf.manifest.at("n_gaussians");
    b.gaussians.sh_bases = bf.manifest.at("sh_bases");
    auto gmu = to_f64(bf.blobs.at("g_mu"));
    auto gsc = to_f64(bf.blobs.at("g_scale"));
    auto gq = to_f64(bf.blobs.at("g_quat"));
    b.gaussians.opacity = to_f64(bf.blobs.at("g_opacity"));
    b.gaussians.sh = to_f64(bf.blobs.at("g_sh"));
    for (size_t i = 0; i < ng; ++i) {
        b.gaussians.mu.push_back({gmu[3 * i], gmu[3 * i + 1], gmu[3 * i + 2]});
        b.gaussians.scale.push_back({gsc[3 * i], gsc[3 * i + 1], gsc[3 * i + 2]});
        b.gaussians.quat.push_back(
            {gq[4 * i], gq[4 * i + 1], gq[4 * i + 2], gq[4 * i + 3]});
    }
    if (b.gaussians.opacity.size() != ng ||
        b.gaussians.sh.size() != ng * b.gaussians.sh_stride())
        throw CorruptAsset("baked: gaussian blob size mismatch");

    size_t na = bf.manifest.at("n_anchors");
    auto amu = to_f64(bf.blobs.at("a_mu"));
    auto argb = to_f64(bf.blobs.at("a_rgb"));
    auto auv = to_f64(bf.blobs.at("a_target_uv"));
    b.anchors.scale = to_f64(bf.blobs.at("a_scale"));
    b.anchors.opacity = to_f64(bf.blobs.at("a_opacity"));
    for (size_t i = 0; i < na; ++i) {
        b.anchors.mu.push_back({amu[3 * i], amu[3 * i + 1], amu[3 * i + 2]});
        b.anchors.rgb.push_back({argb[3 * i], argb[3 * i + 1], argb[3 * i + 2]});
        b.anchors.target_uv.push_back({auv[2 * i], auv[2 * i + 1]});
    }

    int ne3 = rig.n_expr * 3, np27 = rig.n_pose * 27;
    b.head_deform = deform_from_blobs(bf, "hd", static_cast<int>(ng), ne3,
                                      np27, rig.n_joints);
    b.anchor_deform = deform_from_blobs(bf, "ad", static_cast<int>(na), ne3,
                                        np27, rig.n_joints);

    int th = bf.manifest.at("tex_h"), tw = bf.manifest.at("tex_w");
    b.flat_tex = Image(th, tw, 3);
    b.flat_tex.data = to_f64(bf.blobs.at("flat_tex"));
    if (b.flat_tex.data.size() != static_cast<size_t>(th) * tw * 3)
        throw CorruptAsset("baked: flat_tex blob size mismatch");
    return b;
}

}  // namespace ghs
