#include "ghs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace ghs {

// ---------------------------------------------------------------------------
// Schedule

TrainConfig TrainConfig::desk() {
    TrainConfig c;
    c.stage1_iters = 400;
    c.stage2_iters = 4600;
    c.stage3_iters = 2000;
    c.n_anchors = 256;
    c.warp_grid_stride = 4;
    c.vgg_start_iter = 1000;
    c.lambda_halve_iters = {1500, 3000, 4500};
    c.lr_halve_iters = {3000, 6000};
    c.anchor_cleanup_interval = 1000;
    c.max_gaussians = 4000;
    c.lambda_warp = 0.0025;
    return c;
}

LossWeights TrainConfig::weights_at(int iter) const {
    LossWeights w;
    for (int h : lambda_halve_iters)
        if (iter >= h) {
            w.lambda_expr *= 0.5;
            w.lambda_pose *= 0.5;
        }
    w.lambda_vgg = iter >= vgg_start_iter ? 0.1 : 0.0;
    w.lambda_warp = lambda_warp;
    return w;
}

double TrainConfig::lr_scale_at(int iter) const {
    double s = 1.0;
    for (int h : lr_halve_iters)
        if (iter >= h) s *= 0.5;
    return s;
}

int TrainConfig::stage_at(int iter) const {
    if (iter < stage1_iters) return 1;
    if (iter < stage1_iters + stage2_iters) return 2;
    return 3;
}

// ---------------------------------------------------------------------------
// Frame data

std::vector<FrameData> load_frame_data(const FrameSequence& seq) {
    std::vector<FrameData> out;
    out.reserve(seq.frames.size());
    for (int i = 0; i < seq.size(); ++i) {
        FrameData fd;
        fd.params = seq.frames[i];
        if (!fd.params.image_path.empty()) fd.gt = read_png(fd.params.image_path);
        if (!fd.params.head_mask_path.empty())
            fd.head_mask = read_png(fd.params.head_mask_path);
        fd.frame_enc = encode_frame(fd.params, fd.params.cam.width,
                                    fd.params.cam.height, seq.t_norm(i));
        out.push_back(std::move(fd));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Simple losses

double loss_rgb(const Image& render, const Image& gt) {
    if (render.h != gt.h || render.w != gt.w || render.c != gt.c)
        throw ShapeError("loss_rgb: shape mismatch");
    double s = 0;
    for (size_t i = 0; i < render.data.size(); ++i) {
        double d = render.data[i] - gt.data[i];
        s += d * d;
    }
    return s / render.data.size();
}

double loss_head(const Image& alpha, const Image& alpha_head) {
    if (alpha.h != alpha_head.h || alpha.w != alpha_head.w)
        throw ShapeError("loss_head: shape mismatch");
    double s = 0;
    size_t n = static_cast<size_t>(alpha.h) * alpha.w;
    for (size_t i = 0; i < n; ++i) {
        double e = std::max(alpha.data[i] - alpha_head.data[i], 0.0);
        s += e * e;
    }
    return s / n;
}

double loss_warp(const Image& warp) {
    double s = 0;
    size_t n = static_cast<size_t>(warp.h) * warp.w;
    for (size_t i = 0; i < warp.data.size(); ++i) s += std::abs(warp.data[i]);
    return s / n;
}

double loss_anchor_alpha(const std::vector<double>& opacities) {
    if (opacities.empty()) return 0;
    double s = 0;
    for (double o : opacities) s += std::abs(o);
    return s / opacities.size();
}

// ---------------------------------------------------------------------------
// Feature loss (VGG stand-in): 3-level luminance pyramid, forward-difference
// gradients, mean squared feature difference per level.

namespace {

Image luminance(const Image& img) {
    Image l(img.h, img.w, 1);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double s = 0;
            for (int c = 0; c < img.c; ++c) s += img.at(y, x, c);
            l.at(y, x, 0) = s / img.c;
        }
    return l;
}

Image down2(const Image& img) {
    Image d(img.h / 2, img.w / 2, 1);
    for (int y = 0; y < d.h; ++y)
        for (int x = 0; x < d.w; ++x)
            d.at(y, x, 0) = 0.25 * (img.at(2 * y, 2 * x, 0) +
                                    img.at(2 * y, 2 * x + 1, 0) +
                                    img.at(2 * y + 1, 2 * x, 0) +
                                    img.at(2 * y + 1, 2 * x + 1, 0));
    return d;
}

// Adds the gradient-difference loss of one level and accumulates d(loss)/dA.
double level_grad_loss(const Image& A, const Image& B, Image* dA) {
    double s = 0;
    size_t n = 0;
    for (int y = 0; y < A.h; ++y)
        for (int x = 0; x + 1 < A.w; ++x) {
            double g = (A.at(y, x + 1, 0) - A.at(y, x, 0)) -
                       (B.at(y, x + 1, 0) - B.at(y, x, 0));
            s += g * g;
            ++n;
        }
    for (int y = 0; y + 1 < A.h; ++y)
        for (int x = 0; x < A.w; ++x) {
            double g = (A.at(y + 1, x, 0) - A.at(y, x, 0)) -
                       (B.at(y + 1, x, 0) - B.at(y, x, 0));
            s += g * g;
            ++n;
        }
    if (n == 0) return 0;
    if (dA) {
        double inv = 2.0 / n;
        for (int y = 0; y < A.h; ++y)
            for (int x = 0; x + 1 < A.w; ++x) {
                double g = (A.at(y, x + 1, 0) - A.at(y, x, 0)) -
                           (B.at(y, x + 1, 0) - B.at(y, x, 0));
                dA->at(y, x + 1, 0) += inv * g;
                dA->at(y, x, 0) -= inv * g;
            }
        for (int y = 0; y + 1 < A.h; ++y)
            for (int x = 0; x < A.w; ++x) {
                double g = (A.at(y + 1, x, 0) - A.at(y, x, 0)) -
                           (B.at(y + 1, x, 0) - B.at(y, x, 0));
                dA->at(y + 1, x, 0) += inv * g;
                dA->at(y, x, 0) -= inv * g;
            }
    }
    return s / n;
}

}  // namespace

double feature_loss(const Image& a, const Image& b, Image* d_a) {
    if (a.h != b.h || a.w != b.w || a.c != b.c)
        throw ShapeError("feature_loss: shape mismatch");
    std::vector<Image> pa{luminance(a)}, pb{luminance(b)};
    for (int l = 1; l < 3; ++l) {
        if (pa.back().h < 4 || pa.back().w < 4) break;
        pa.push_back(down2(pa.back()));
        pb.push_back(down2(pb.back()));
    }

    double total = 0;
    std::vector<Image> dl(pa.size());
    for (size_t l = 0; l < pa.size(); ++l) {
        if (d_a) dl[l] = Image(pa[l].h, pa[l].w, 1);
        total += level_grad_loss(pa[l], pb[l], d_a ? &dl[l] : nullptr);
    }
    if (d_a) {
        // Collapse the pyramid: push each level's gradient back to level 0.
        for (size_t l = pa.size(); l-- > 1;) {
            for (int y = 0; y < dl[l].h; ++y)
                for (int x = 0; x < dl[l].w; ++x) {
                    double g = 0.25 * dl[l].at(y, x, 0);
                    dl[l - 1].at(2 * y, 2 * x, 0) += g;
                    dl[l - 1].at(2 * y, 2 * x + 1, 0) += g;
                    dl[l - 1].at(2 * y + 1, 2 * x, 0) += g;
                    dl[l - 1].at(2 * y + 1, 2 * x + 1, 0) += g;
                }
        }
        for (int y = 0; y < a.h; ++y)
            for (int x = 0; x < a.w; ++x) {
                double g = dl[0].at(y, x, 0) / a.c;
                for (int c = 0; c < a.c; ++c) d_a->at(y, x, c) += g;
            }
    }
    return total;
}

// ---------------------------------------------------------------------------
// Forward pass

namespace {

struct GaussFwd {
    bool visible = false;
    LbsResult lbs;
    Mat3 cov;      // canonical
    Mat3 cov_w;    // world
    Vec3 mu_cam;
    Mat3 cov_cam;
    Vec3 dir;
};

struct ForwardCtx {
    SkinningFrame sk;
    DeformNetCache head_cache;
    std::vector<GaussFwd> g;
    std::vector<Splat2D> head_splats;
    std::vector<int> head_map;
    RenderLayer head_layer;

    bool have_anchors = false;
    DeformNetCache anchor_cache;
    std::vector<Vec3> a_cam;
    std::vector<Vec2> a_px;
    std::vector<bool> a_valid;
    std::vector<Splat2D> anchor_splats;
    std::vector<int> anchor_map;
    RenderLayer anchor_layer;

    bool have_body = false;
    BodyTexRender body;

    Framebuffer fb;
};

void forward_avatar(const AvatarModel& m, const FrameParams& frame,
                    const std::vector<double>& enc, const RenderOptions& opts,
                    bool clamp_output, ForwardCtx& ctx) {
    const Camera& cam = frame.cam;
    int N = m.gaussians.size();

    Eigen::MatrixXd X(N, 3);
    for (int i = 0; i < N; ++i)
        X.row(i) << m.gaussians.mu[i].x, m.gaussians.mu[i].y, m.gaussians.mu[i].z;
    deform_net_eval(m.deform, X, &ctx.head_cache);
    ctx.sk = compute_skinning(m.rig, frame);

    ctx.g.resize(N);
    int stride = m.gaussians.sh_stride();
    std::vector<double> sh(stride);
    const Mat3& Wr = cam.world_to_cam_rot;
    for (int i = 0; i < N; ++i) {
        GaussFwd& f = ctx.g[i];
        const DeformOutputs& o = ctx.head_cache.out;
        f.lbs = lbs_transform(m.rig, frame.psi, ctx.sk, m.gaussians.mu[i],
                              o.expr.row(i).data(), o.pose.row(i).data(),
                              o.lbs_w.row(i).data());
        Vec3 mu_w = f.lbs.R * m.gaussians.mu[i] + f.lbs.T;
        f.cov = build_covariance(m.gaussians.scale[i], m.gaussians.quat[i]);
        f.cov_w = f.lbs.R * f.cov * f.lbs.R.transpose();
        f.mu_cam = cam.to_camera(mu_w);
        f.cov_cam = Wr * f.cov_w * Wr.transpose();
        auto proj = project_gaussian(f.mu_cam, f.cov_cam, cam);
        if (!proj) continue;
        f.visible = true;
        f.dir = f.mu_cam.normalized();
        std::copy_n(&m.gaussians.sh[static_cast<size_t>(i) * stride], stride,
                    sh.begin());
        ctx.head_splats.push_back({proj->mu2d, proj->cov2d, proj->depth,
                                   sh_to_rgb(sh, f.dir),
                                   m.gaussians.opacity[i]});
        ctx.head_map.push_back(i);
    }
    ctx.head_layer =
        splat_layer(ctx.head_splats, cam.width, cam.height, opts.threads);

    int Na = m.anchors.size();
    if (Na > 0) {
        ctx.have_anchors = true;
        Eigen::MatrixXd Xa(Na, 3);
        for (int i = 0; i < Na; ++i)
            Xa.row(i) << m.anchors.mu[i].x, m.anchors.mu[i].y, m.anchors.mu[i].z;
        deform_net_eval(m.deform, Xa, &ctx.anchor_cache);
        ctx.a_cam.resize(Na);
        ctx.a_px.resize(Na);
        ctx.a_valid.resize(Na);
        for (int i = 0; i < Na; ++i) {
            const DeformOutputs& o = ctx.anchor_cache.out;
            LbsResult r = lbs_transform(m.rig, frame.psi, ctx.sk, m.anchors.mu[i],
                                        o.expr.row(i).data(), o.pose.row(i).data(),
                                        o.lbs_w.row(i).data());
            Vec3 w = r.R * m.anchors.mu[i] + r.T;
            ctx.a_cam[i] = cam.to_camera(w);
            ctx.a_valid[i] = ctx.a_cam[i].z > kDefaultNear;
            ctx.a_px[i] = ctx.a_valid[i] ? cam.project(ctx.a_cam[i]) : Vec2{0, 0};
        }
        if (opts.render_anchors) {
            for (int i = 0; i < Na; ++i) {
                if (!ctx.a_valid[i]) continue;
                double s2 = m.anchors.scale[i] * m.anchors.scale[i];
                auto proj = project_gaussian(ctx.a_cam[i], Mat3::diag(s2, s2, s2),
                                             cam);
                if (!proj) continue;
                ctx.anchor_splats.push_back({proj->mu2d, proj->cov2d, proj->depth,
                                             m.anchors.rgb[i],
                                             m.anchors.opacity[i]});
                ctx.anchor_map.push_back(i);
            }
        }
    }
    ctx.anchor_layer =
        opts.render_anchors && !ctx.anchor_splats.empty()
            ? splat_layer(ctx.anchor_splats, cam.width, cam.height, opts.threads)
            : RenderLayer(cam.height, cam.width);

    if (opts.render_body) {
        ctx.have_body = true;
        ctx.body = render_body_texture(m.tex, m.wnet, m.fnet, enc, cam.width,
                                       cam.height, opts.warp_grid_stride);
    }
    ctx.fb = composite(ctx.anchor_layer, ctx.head_layer,
                       ctx.have_body ? ctx.body.color : Image(),
                       Vec3{1, 1, 1}, clamp_output);
}

}  // namespace

Framebuffer render_avatar(const AvatarModel& model, const FrameParams& frame,
                          const std::vector<double>& frame_enc,
                          const RenderOptions& opts, bool clamp_output) {
    ForwardCtx ctx;
    forward_avatar(model, frame, frame_enc, opts, clamp_output, ctx);
    return std::move(ctx.fb);
}

ModelGrads make_model_grads(const AvatarModel& m) {
    ModelGrads g;
    int n = m.gaussians.size(), na = m.anchors.size();
    g.d_mu.assign(n, {});
    g.d_scale.assign(n, {});
    g.d_quat.assign(n, {0, 0, 0, 0});
    g.d_opacity.assign(n, 0.0);
    g.d_sh.assign(m.gaussians.sh.size(), 0.0);
    g.d_anchor_mu.assign(na, {});
    g.d_anchor_rgb.assign(na, {});
    g.d_anchor_scale.assign(na, 0.0);
    g.d_anchor_opacity.assign(na, 0.0);
    g.d_deform = m.deform.net.zero_grads();
    g.d_warp_net = m.wnet.net.zero_grads();
    g.d_fine_net = m.fnet.net.zero_grads();
    g.d_coarse.assign(m.tex.coarse.size(), 0.0);
    g.d_latent.assign(m.tex.latent.size(), 0.0);
    g.mu2d_grad_norm.assign(n, 0.0);
    return g;
}

LossBreakdown compute_loss_and_grads(const AvatarModel& m,
                                     const FrameData& frame,
                                     const LossWeights& w,
                                     const RenderOptions& opts,
                                     ModelGrads* grads) {
    const Camera& cam = frame.params.cam;
    int H = cam.height, W = cam.width;
    int N = m.gaussians.size(), Na = m.anchors.size();

    ForwardCtx ctx;
    forward_avatar(m, frame.params, frame.frame_enc, opts, false, ctx);

    LossBreakdown L;
    Image d_fb;
    if (grads) d_fb = Image(H, W, 3);

    // RGB.
    {
        if (ctx.fb.rgb.data.size() != frame.gt.data.size())
            throw ShapeError("compute_loss_and_grads: ground truth size mismatch");
        double s = 0;
        double inv = 2.0 / ctx.fb.rgb.data.size();
        for (size_t i = 0; i < ctx.fb.rgb.data.size(); ++i) {
            double d = ctx.fb.rgb.data[i] - frame.gt.data[i];
            s += d * d;
            if (grads) d_fb.data[i] += inv * d;
        }
        L.rgb = s / ctx.fb.rgb.data.size();
    }

    // Feature (VGG stand-in).
    if (w.lambda_vgg > 0) {
        Image d_feat;
        if (grads) d_feat = Image(H, W, 3);
        L.vgg = feature_loss(ctx.fb.rgb, frame.gt, grads ? &d_feat : nullptr);
        if (grads)
            for (size_t i = 0; i < d_fb.data.size(); ++i)
                d_fb.data[i] += w.lambda_vgg * d_feat.data[i];
    }

    // Head alpha excess.
    Image d_head_alpha_extra;
    if (w.lambda_head > 0 && frame.head_mask.data.size() ==
                                 static_cast<size_t>(H) * W) {
        if (grads) d_head_alpha_extra = Image(H, W, 1);
        double s = 0;
        size_t n = static_cast<size_t>(H) * W;
        for (size_t i = 0; i < n; ++i) {
            double e = std::max(
                ctx.head_layer.alpha.data[i] - frame.head_mask.data[i], 0.0);
            s += e * e;
            if (grads)
                d_head_alpha_extra.data[i] = w.lambda_head * 2.0 * e / n;
        }
        L.head = s / n;
    }

    // Warp magnitude.
    Image d_warp_img;
    if (ctx.have_body) {
        if (grads) d_warp_img = Image(H, W, 2);
        if (w.lambda_warp > 0) {
            L.warp = loss_warp(ctx.body.warp);
            if (grads) {
                double inv = w.lambda_warp / (static_cast<double>(H) * W);
                for (size_t i = 0; i < ctx.body.warp.data.size(); ++i) {
                    double v = ctx.body.warp.data[i];
                    d_warp_img.data[i] = v > 0 ? inv : (v < 0 ? -inv : 0.0);
                }
            }
        }
    }

    // Anchor opacity magnitude.
    if (w.lambda_anchor_alpha > 0 && Na > 0)
        L.anchor_alpha = loss_anchor_alpha(m.anchors.opacity);

    // Anchor correspondence loss (through the warp net at anchor pixels).
    Mlp::Cache anchor_warp_cache;
    Eigen::MatrixXd anchor_warp_in, anchor_residual;
    std::vector<int> anchor_valid_idx;
    if (w.lambda_anchor > 0 && ctx.have_anchors) {
        for (int i = 0; i < Na; ++i)
            if (ctx.a_valid[i]) anchor_valid_idx.push_back(i);
        int V = static_cast<int>(anchor_valid_idx.size());
        if (V > 0) {
            anchor_warp_in.resize(V, warp_input_dim());
            std::vector<double> row;
            for (int j = 0; j < V; ++j) {
                row.clear();
                encode_pixel(ctx.a_px[anchor_valid_idx[j]], W, H, row);
                row.insert(row.end(), frame.frame_enc.begin(),
                           frame.frame_enc.end());
                anchor_warp_in.row(j) =
                    Eigen::Map<const Eigen::VectorXd>(row.data(), row.size());
            }
            Eigen::MatrixXd delta =
                m.wnet.net.forward(anchor_warp_in, &anchor_warp_cache);
            anchor_residual.resize(V, 2);
            double s = 0;
            for (int j = 0; j < V; ++j) {
                int i = anchor_valid_idx[j];
                Vec2 r{ctx.a_px[i].x + m.tex.pad + delta(j, 0) -
                           m.anchors.target_uv[i].x,
                       ctx.a_px[i].y + m.tex.pad + delta(j, 1) -
                           m.anchors.target_uv[i].y};
                anchor_residual.row(j) << r.x, r.y;
                s += r.x * r.x + r.y * r.y;
            }
            L.anchor = s / (2.0 * V);
        }
    }

    // FLAME regularization toward mesh pseudo ground truth.
    int ne3 = m.rig.n_expr * 3, np27 = m.rig.n_pose * 27, nj = m.rig.n_joints;
    RowMatrixXd dE_h, dP_h, dW_h, dE_a, dP_a, dW_a;
    if (grads) {
        dE_h = RowMatrixXd::Zero(N, ne3);
        dP_h = RowMatrixXd::Zero(N, np27);
        dW_h = RowMatrixXd::Zero(N, nj);
        dE_a = RowMatrixXd::Zero(Na, ne3);
        dP_a = RowMatrixXd::Zero(Na, np27);
        dW_a = RowMatrixXd::Zero(Na, nj);
    }
    {
        auto flame_term = [&](const Vec3& mu, const DeformOutputs& out, int row,
                              RowMatrixXd* dE, RowMatrixXd* dP,
                              RowMatrixXd* dW) {
            int v = pseudo_gt_lookup(m.rig, mu);
            double term = 0;
            auto piece = [&](const RowMatrixXd& pred,
                             const std::vector<double>& gt, double lambda,
                             RowMatrixXd* dst) {
                double n2 = 0;
                for (int k = 0; k < pred.cols(); ++k) {
                    double d = pred(row, k) - gt[k];
                    n2 += d * d;
                }
                double nrm = std::sqrt(n2);
                term += lambda * nrm;
                if (dst && nrm > 1e-12) {
                    double s = lambda / (nrm * N);
                    for (int k = 0; k < pred.cols(); ++k)
                        (*dst)(row, k) += s * (pred(row, k) - gt[k]);
                }
            };
            piece(out.expr, m.rig.vert_expr[v], w.lambda_expr, dE);
            piece(out.pose, m.rig.vert_pose[v], w.lambda_pose, dP);
            piece(out.lbs_w, m.rig.vert_lbs[v], w.lambda_lbs, dW);
            return term;
        };
        double s = 0;
        for (int i = 0; i < N; ++i)
            s += flame_term(m.gaussians.mu[i], ctx.head_cache.out, i,
                            grads ? &dE_h : nullptr, grads ? &dP_h : nullptr,
                            grads ? &dW_h : nullptr);
        if (ctx.have_anchors)
            for (int i = 0; i < Na; ++i)
                s += flame_term(m.anchors.mu[i], ctx.anchor_cache.out, i,
                                grads ? &dE_a : nullptr, grads ? &dP_a : nullptr,
                                grads ? &dW_a : nullptr);
        L.flame = s / N;
    }

    L.total = L.rgb + L.flame + w.lambda_vgg * L.vgg + w.lambda_head * L.head +
              w.lambda_warp * L.warp +
              w.lambda_anchor_alpha * L.anchor_alpha +
              w.lambda_anchor * L.anchor;
    if (!grads) return L;

    // ------------------------------------------------------------------ back
    CompositeGrads cg =
        composite_backward(ctx.anchor_layer, ctx.head_layer,
                           ctx.have_body ? ctx.body.color : Image(),
                           Vec3{1, 1, 1}, d_fb);

    Image d_head_alpha = cg.d_head_alpha;
    if (d_head_alpha_extra.data.size() == d_head_alpha.data.size())
        for (size_t i = 0; i < d_head_alpha.data.size(); ++i)
            d_head_alpha.data[i] += d_head_alpha_extra.data[i];

    const Mat3& Wr = cam.world_to_cam_rot;
    Mat3 WrT = Wr.transpose();
    int stride = m.gaussians.sh_stride();

    // Regular Gaussians.
    {
        std::vector<SplatGrad> sg = splat_layer_backward(
            ctx.head_splats, W, H, cg.d_head_color, d_head_alpha, opts.threads);
        std::vector<double> sh(stride), dsh(stride);
        for (size_t s = 0; s < sg.size(); ++s) {
            int i = ctx.head_map[s];
            GaussFwd& f = ctx.g[i];

            grads->d_opacity[i] += sg[s].d_opacity;
            grads->mu2d_grad_norm[i] += sg[s].d_mu2d.norm();

            std::copy_n(&m.gaussians.sh[static_cast<size_t>(i) * stride],
                        stride, sh.begin());
            Vec3 d_dir = sh_to_rgb_backward(sh, f.dir, sg[s].d_rgb, dsh);
            for (int k = 0; k < stride; ++k)
                grads->d_sh[static_cast<size_t>(i) * stride + k] += dsh[k];

            Vec3 d_mu_cam{0, 0, 0};
            Mat3 d_cov_cam = Mat3::zero();
            project_gaussian_backward(f.mu_cam, f.cov_cam, cam, sg[s].d_mu2d,
                                      sg[s].d_cov2d, d_mu_cam, d_cov_cam);
            // View direction path: dir = mu_cam / |mu_cam|.
            double mn = f.mu_cam.norm();
            Vec3 t = d_dir - f.dir * f.dir.dot(d_dir);
            d_mu_cam += t / mn;

            Vec3 d_mu_w = WrT * d_mu_cam;
            Mat3 d_cov_w = WrT * d_cov_cam * Wr;

            // cov_w = R cov R^T with R = blended LBS linear map.
            Mat3 d_lin = (d_cov_w + d_cov_w.transpose()) * f.lbs.R * f.cov;
            Mat3 d_cov = f.lbs.R.transpose() * d_cov_w * f.lbs.R;
            Vec3 d_scale{0, 0, 0};
            Quat d_quat{0, 0, 0, 0};
            build_covariance_backward(m.gaussians.scale[i], m.gaussians.quat[i],
                                      d_cov, d_scale, d_quat);
            grads->d_scale[i] += d_scale;
            grads->d_quat[i].w += d_quat.w;
            grads->d_quat[i].x += d_quat.x;
            grads->d_quat[i].y += d_quat.y;
            grads->d_quat[i].z += d_quat.z;

            lbs_transform_backward(m.rig, frame.params.psi, ctx.sk,
                                   m.gaussians.mu[i],
                                   ctx.head_cache.out.lbs_w.row(i).data(),
                                   f.lbs, d_mu_w, d_lin, grads->d_mu[i],
                                   dE_h.row(i).data(), dP_h.row(i).data(),
                                   dW_h.row(i).data());
        }
        Eigen::MatrixXd dX = deform_net_backward(m.deform, ctx.head_cache, dE_h,
                                                 dP_h, dW_h, grads->d_deform,
                                                 true);
        for (int i = 0; i < N; ++i) {
            grads->d_mu[i].x += dX(i, 0);
            grads->d_mu[i].y += dX(i, 1);
            grads->d_mu[i].z += dX(i, 2);
        }
    }

    // Anchors.
    if (ctx.have_anchors) {
        std::vector<Vec3> d_a_cam(Na, Vec3{0, 0, 0});

        if (!ctx.anchor_splats.empty()) {
            std::vector<SplatGrad> sg =
                splat_layer_backward(ctx.anchor_splats, W, H, cg.d_anchor_color,
                                     cg.d_anchor_alpha, opts.threads);
            for (size_t s = 0; s < sg.size(); ++s) {
                int i = ctx.anchor_map[s];
                grads->d_anchor_rgb[i] += sg[s].d_rgb;
                grads->d_anchor_opacity[i] += sg[s].d_opacity;
                double sc = m.anchors.scale[i];
                Mat3 d_cov_cam = Mat3::zero();
                project_gaussian_backward(ctx.a_cam[i],
                                          Mat3::diag(sc * sc, sc * sc, sc * sc),
                                          cam, sg[s].d_mu2d, sg[s].d_cov2d,
                                          d_a_cam[i], d_cov_cam);
                grads->d_anchor_scale[i] +=
                    2.0 * sc *
                    (d_cov_cam(0, 0) + d_cov_cam(1, 1) + d_cov_cam(2, 2));
            }
        }

        if (w.lambda_anchor_alpha > 0)
            for (int i = 0; i < Na; ++i)
                grads->d_anchor_opacity[i] +=
                    w.lambda_anchor_alpha *
                    (m.anchors.opacity[i] > 0 ? 1.0 : -1.0) / Na;

        if (anchor_residual.rows() > 0) {
            int V = static_cast<int>(anchor_valid_idx.size());
            Eigen::MatrixXd dY = (w.lambda_anchor / V) * anchor_residual;
            Eigen::MatrixXd dX = m.wnet.net.backward(anchor_warp_cache, dY,
                                                     grads->d_warp_net, true);
            for (int j = 0; j < V; ++j) {
                int i = anchor_valid_idx[j];
                // Identity path plus the warp net's sensitivity to its pixel
                // encoding.
                Vec2 d_px{dY(j, 0), dY(j, 1)};
                Eigen::RowVectorXd dxr = dX.row(j);
                d_px += encode_pixel_backward(ctx.a_px[i], W, H, dxr.data());
                const Vec3& c = ctx.a_cam[i];
                d_a_cam[i].x += d_px.x * cam.fx / c.z;
                d_a_cam[i].y += d_px.y * cam.fy / c.z;
                d_a_cam[i].z += -d_px.x * cam.fx * c.x / (c.z * c.z) -
                                d_px.y * cam.fy * c.y / (c.z * c.z);
            }
        }

        for (int i = 0; i < Na; ++i) {
            Vec3 d_w = WrT * d_a_cam[i];
            LbsResult r = lbs_transform(m.rig, frame.params.psi, ctx.sk,
                                        m.anchors.mu[i],
                                        ctx.anchor_cache.out.expr.row(i).data(),
                                        ctx.anchor_cache.out.pose.row(i).data(),
                                        ctx.anchor_cache.out.lbs_w.row(i).data());
            lbs_transform_backward(m.rig, frame.params.psi, ctx.sk,
                                   m.anchors.mu[i],
                                   ctx.anchor_cache.out.lbs_w.row(i).data(), r,
                                   d_w, Mat3::zero(), grads->d_anchor_mu[i],
                                   dE_a.row(i).data(), dP_a.row(i).data(),
                                   dW_a.row(i).data());
        }
        Eigen::MatrixXd dXa = deform_net_backward(m.deform, ctx.anchor_cache,
                                                  dE_a, dP_a, dW_a,
                                                  grads->d_deform, true);
        for (int i = 0; i < Na; ++i) {
            grads->d_anchor_mu[i].x += dXa(i, 0);
            grads->d_anchor_mu[i].y += dXa(i, 1);
            grads->d_anchor_mu[i].z += dXa(i, 2);
        }
    }

    // Body texture.
    if (ctx.have_body) {
        BodyTexGrads bg;
        bg.d_coarse.swap(grads->d_coarse);
        bg.d_latent.swap(grads->d_latent);
        bg.d_warp = std::move(grads->d_warp_net);
        bg.d_fine = std::move(grads->d_fine_net);
        render_body_texture_backward(m.tex, m.wnet, m.fnet, frame.frame_enc,
                                     ctx.body, cg.d_body, d_warp_img, bg);
        bg.d_coarse.swap(grads->d_coarse);
        bg.d_latent.swap(grads->d_latent);
        grads->d_warp_net = std::move(bg.d_warp);
        grads->d_fine_net = std::move(bg.d_fine);
    }
    return L;
}

// ---------------------------------------------------------------------------
// Initialization

GaussianSet init_gaussians_from_rig(const Rig& rig, std::mt19937& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    GaussianSet set;
    for (const Vec3& v : rig.verts) {
        Gaussian3D g;
        g.mu = v + Vec3{0.004 * gauss(rng), 0.004 * gauss(rng),
                        0.004 * gauss(rng)};
        double s = 0.025 * std::exp(0.15 * gauss(rng));
        g.scale = {s, s, s};
        g.quat = {1, 0, 0, 0};
        g.opacity = 0.3;
        g.sh.assign(48, 0.0);
        for (int c = 0; c < 3; ++c) g.sh[c] = 0.05 * gauss(rng);
        set.push_back(g);
    }
    return set;
}

// ---------------------------------------------------------------------------
// Adam

namespace {
constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

double bias_lr(double lr, int t) {
    return lr * std::sqrt(1.0 - std::pow(kBeta2, t)) /
           (1.0 - std::pow(kBeta1, t));
}
}  // namespace

void Trainer::Adam::ensure(size_t n) {
    if (m.size() != n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }
}

void Trainer::Adam::step(std::vector<double>& x, const std::vector<double>& g,
                         double lr, int t) {
    ensure(x.size());
    double a = bias_lr(lr, t);
    for (size_t i = 0; i < x.size(); ++i) {
        m[i] = kBeta1 * m[i] + (1 - kBeta1) * g[i];
        v[i] = kBeta2 * v[i] + (1 - kBeta2) * g[i] * g[i];
        x[i] -= a * m[i] / (std::sqrt(v[i]) + kEps);
    }
}

void Trainer::MlpAdam::step(Mlp& mlp, const MlpGrads& g, double lr, int t) {
    if (m.W.size() != mlp.W.size()) {
        m = mlp.zero_grads();
        v = mlp.zero_grads();
    }
    double a = bias_lr(lr, t);
    for (size_t l = 0; l < mlp.W.size(); ++l) {
        m.W[l] = kBeta1 * m.W[l] + (1 - kBeta1) * g.W[l];
        v.W[l] = kBeta2 * v.W[l] +
                 (1 - kBeta2) * g.W[l].cwiseProduct(g.W[l]);
        mlp.W[l] -= a * (m.W[l].array() / (v.W[l].array().sqrt() + kEps))
                            .matrix();
        m.b[l] = kBeta1 * m.b[l] + (1 - kBeta1) * g.b[l];
        v.b[l] = kBeta2 * v.b[l] + (1 - kBeta2) * g.b[l].cwiseProduct(g.b[l]);
        mlp.b[l] -= a * (m.b[l].array() / (v.b[l].array().sqrt() + kEps))
                            .matrix();
    }
}

// ---------------------------------------------------------------------------
// Trainer

namespace {

double logit(double p) {
    p = std::clamp(p, 1e-6, 1.0 - 1e-6);
    return std::log(p / (1.0 - p));
}
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Trainer::Trainer(AvatarModel model, std::vector<FrameData> train_frames,
                 TrainConfig cfg)
    : model_(std::move(model)), frames_(std::move(train_frames)),
      cfg_(std::move(cfg)), rng_(cfg_.seed) {
    if (frames_.empty()) throw InvalidArgument("Trainer: no training frames");
    int n = model_.gaussians.size();
    raw_logscale_.resize(3 * n);
    raw_logit_op_.resize(n);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c)
            raw_logscale_[3 * i + c] = std::log(model_.gaussians.scale[i][c]);
        raw_logit_op_[i] = logit(model_.gaussians.opacity[i]);
    }
    densify_grad_accum_.assign(n, 0.0);
    densify_count_.assign(n, 0);
}

void Trainer::begin_stage2() {
    const FrameData& canon = frames_.front();
    if (canon.head_mask.data.empty())
        throw InvalidState("Trainer: canonical frame has no head mask");
    model_.anchors = init_anchors(model_.gaussians, model_.rig, model_.deform,
                                  canon.params, canon.head_mask, model_.tex.pad,
                                  cfg_.n_anchors, true);
    int na = model_.anchors.size();
    raw_a_logscale_.resize(na);
    raw_a_logit_op_.resize(na);
    for (int i = 0; i < na; ++i) {
        raw_a_logscale_[i] = std::log(model_.anchors.scale[i]);
        raw_a_logit_op_[i] = logit(model_.anchors.opacity[i]);
    }
    ad_amu_ = {};
    ad_alogscale_ = {};
    ad_alogit_op_ = {};
    ad_argb_ = {};
    anchors_initialized_ = true;
}

LossBreakdown Trainer::step() {
    if (iter_ >= cfg_.total_iters())
        throw InvalidState("Trainer: schedule exhausted");
    int stage = cfg_.stage_at(iter_);
    if (stage >= 2 && !anchors_initialized_) begin_stage2();

    LossWeights w = cfg_.weights_at(iter_);
    RenderOptions opts;
    opts.threads = cfg_.threads;
    opts.warp_grid_stride = cfg_.warp_grid_stride;
    if (stage == 1) {
        opts.render_anchors = false;
        opts.render_body = false;
        w.lambda_vgg = w.lambda_head = w.lambda_warp = 0;
        w.lambda_anchor_alpha = w.lambda_anchor = 0;
    } else if (stage == 3) {
        opts.render_anchors = false;
        w.lambda_head = w.lambda_warp = w.lambda_anchor_alpha = 0;
    }

    const FrameData& frame = frames_[iter_ % frames_.size()];
    ModelGrads g = make_model_grads(model_);
    LossBreakdown L = compute_loss_and_grads(model_, frame, w, opts, &g);
    apply_update(g, L);

    // Density control over the regular Gaussians.
    for (int i = 0; i < model_.gaussians.size(); ++i) {
        densify_grad_accum_[i] += g.mu2d_grad_norm[i];
        densify_count_[i] += 1;
    }
    int densify_until = cfg_.stage1_iters + cfg_.stage2_iters / 2;
    if (iter_ > 0 && iter_ % cfg_.densify_interval == 0 &&
        iter_ < densify_until) {
        double thr = cfg_.weights_at(iter_).lambda_vgg > 0
                         ? cfg_.densify_grad_threshold_post_vgg
                         : cfg_.densify_grad_threshold_pre_vgg;
        densify_and_prune(thr);
    }

    if (stage == 2 && anchors_initialized_ &&
        iter_ % cfg_.anchor_cleanup_interval == 0 && iter_ > cfg_.stage1_iters) {
        int removed = frustum_cleanup(model_.anchors, model_.rig, model_.deform,
                                      frames_.front().params);
        if (removed > 0) {
            int na = model_.anchors.size();
            raw_a_logscale_.resize(na);
            raw_a_logit_op_.resize(na);
            for (int i = 0; i < na; ++i) {
                raw_a_logscale_[i] = std::log(model_.anchors.scale[i]);
                raw_a_logit_op_[i] = logit(model_.anchors.opacity[i]);
            }
            ad_amu_ = {};
            ad_alogscale_ = {};
            ad_alogit_op_ = {};
            ad_argb_ = {};
        }
    }

    ++iter_;
    return L;
}

void Trainer::apply_update(const ModelGrads& g, const LossBreakdown&) {
    ++adam_t_;
    int stage = cfg_.stage_at(iter_);
    double ls = cfg_.lr_scale_at(iter_);
    int n = model_.gaussians.size();

    bool train_geometry = stage <= 2;
    bool train_deform = stage <= 2;
    bool train_anchors = stage == 2 && anchors_initialized_;
    bool train_texture = stage >= 2;

    if (train_geometry) {
        std::vector<double> mu(3 * n), dmu(3 * n);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < 3; ++c) {
                mu[3 * i + c] = model_.gaussians.mu[i][c];
                dmu[3 * i + c] = g.d_mu[i][c];
            }
        ad_mu_.step(mu, dmu, cfg_.lr_mu * ls, adam_t_);
        for (int i = 0; i < n; ++i)
            model_.gaussians.mu[i] = {mu[3 * i], mu[3 * i + 1], mu[3 * i + 2]};

        std::vector<double> dls(3 * n);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < 3; ++c)
                dls[3 * i + c] = g.d_scale[i][c] * model_.gaussians.scale[i][c];
        ad_logscale_.step(raw_logscale_, dls, cfg_.lr_scale * ls, adam_t_);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < 3; ++c)
                model_.gaussians.scale[i][c] = std::exp(raw_logscale_[3 * i + c]);

        std::vector<double> q(4 * n), dq(4 * n);
        for (int i = 0; i < n; ++i) {
            q[4 * i] = model_.gaussians.quat[i].w;
            q[4 * i + 1] = model_.gaussians.quat[i].x;
            q[4 * i + 2] = model_.gaussians.quat[i].y;
            q[4 * i + 3] = model_.gaussians.quat[i].z;
            dq[4 * i] = g.d_quat[i].w;
            dq[4 * i + 1] = g.d_quat[i].x;
            dq[4 * i + 2] = g.d_quat[i].y;
            dq[4 * i + 3] = g.d_quat[i].z;
        }
        ad_quat_.step(q, dq, cfg_.lr_quat * ls, adam_t_);
        for (int i = 0; i < n; ++i)
            model_.gaussians.quat[i] = {q[4 * i], q[4 * i + 1], q[4 * i + 2],
                                        q[4 * i + 3]};
    }

    // Opacity and SH stay trainable in every stage.
    {
        std::vector<double> dop(n);
        for (int i = 0; i < n; ++i) {
            double o = model_.gaussians.opacity[i];
            dop[i] = g.d_opacity[i] * o * (1.0 - o);
        }
        ad_logit_op_.step(raw_logit_op_, dop, cfg_.lr_opacity * ls, adam_t_);
        for (int i = 0; i < n; ++i)
            model_.gaussians.opacity[i] = sigmoid(raw_logit_op_[i]);

        ad_sh_.step(model_.gaussians.sh, g.d_sh, cfg_.lr_sh * ls, adam_t_);
    }

    if (train_deform)
        ad_deform_.step(model_.deform.net, g.d_deform, cfg_.lr_net * ls,
                        adam_t_);

    if (train_anchors) {
        int na = model_.anchors.size();
        std::vector<double> amu(3 * na), damu(3 * na), argb(3 * na),
            dargb(3 * na), dals(na), daop(na);
        for (int i = 0; i < na; ++i) {
            for (int c = 0; c < 3; ++c) {
                amu[3 * i + c] = model_.anchors.mu[i][c];
                damu[3 * i + c] = g.d_anchor_mu[i][c];
                argb[3 * i + c] = model_.anchors.rgb[i][c];
                dargb[3 * i + c] = g.d_anchor_rgb[i][c];
            }
            dals[i] = g.d_anchor_scale[i] * model_.anchors.scale[i];
            double o = model_.anchors.opacity[i];
            daop[i] = g.d_anchor_opacity[i] * o * (1.0 - o);
        }
        ad_amu_.step(amu, damu, cfg_.lr_net * ls, adam_t_);
        ad_argb_.step(argb, dargb, cfg_.lr_net * ls, adam_t_);
        ad_alogscale_.step(raw_a_logscale_, dals, cfg_.lr_net * ls, adam_t_);
        ad_alogit_op_.step(raw_a_logit_op_, daop, cfg_.lr_net * ls, adam_t_);
        for (int i = 0; i < na; ++i) {
            model_.anchors.mu[i] = {amu[3 * i], amu[3 * i + 1], amu[3 * i + 2]};
            model_.anchors.rgb[i] = {argb[3 * i], argb[3 * i + 1],
                                     argb[3 * i + 2]};
            model_.anchors.scale[i] = std::exp(raw_a_logscale_[i]);
            model_.anchors.opacity[i] = sigmoid(raw_a_logit_op_[i]);
        }
    }

    if (train_texture) {
        ad_coarse_.step(model_.tex.coarse, g.d_coarse, cfg_.lr_net * ls,
                        adam_t_);
        ad_latent_.step(model_.tex.latent, g.d_latent, cfg_.lr_net * ls,
                        adam_t_);
        ad_wnet_.step(model_.wnet.net, g.d_warp_net, cfg_.lr_net * ls, adam_t_);
        ad_fnet_.step(model_.fnet.net, g.d_fine_net, cfg_.lr_net * ls, adam_t_);
    }

    if (anchors_initialized_) {
        clamp_anchor_params(model_.anchors);
        for (int i = 0; i < model_.anchors.size(); ++i) {
            raw_a_logscale_[i] = std::log(model_.anchors.scale[i]);
            raw_a_logit_op_[i] = logit(model_.anchors.opacity[i]);
        }
    }
}

void Trainer::densify_and_prune(double threshold) {
    int n = model_.gaussians.size();
    std::vector<double> avg(n, 0.0);
    for (int i = 0; i < n; ++i)
        avg[i] = densify_count_[i] > 0
                     ? densify_grad_accum_[i] / densify_count_[i]
                     : 0.0;

    struct NewEntry {
        int src;
        bool fresh;      // zeroed Adam state
        bool shrink;     // split child: scale / 1.6
        Vec3 offset;     // world-space position offset for split children
    };
    std::vector<NewEntry> plan;
    std::normal_distribution<double> gauss(0.0, 1.0);
    int budget = cfg_.max_gaussians - n;
    int survivors = n;
    for (int i = 0; i < n; ++i) {
        bool prune = model_.gaussians.opacity[i] < cfg_.prune_opacity;
        if (prune && survivors - 1 >= 16) {
            --survivors;  // never prune down to nothing
            continue;
        }
        const Vec3& s = model_.gaussians.scale[i];
        double smax = std::max({s.x, s.y, s.z});
        bool densify = avg[i] > threshold && budget > 0;
        if (!densify) {
            plan.push_back({i, false, false, {}});
            continue;
        }
        if (smax > cfg_.densify_scale_threshold) {
            Mat3 R = quat_to_rot(model_.gaussians.quat[i]);
            for (int k = 0; k < 2; ++k) {
                Vec3 local{s.x * gauss(rng_), s.y * gauss(rng_),
                           s.z * gauss(rng_)};
                plan.push_back({i, k > 0, true, R * local});
            }
            --budget;
        } else {
            plan.push_back({i, false, false, {}});
            plan.push_back({i, true, false, {}});
            --budget;
        }
    }

    GaussianSet next;
    next.sh_bases = model_.gaussians.sh_bases;
    int stride = model_.gaussians.sh_stride();
    std::vector<double> nls, nlo;
    auto copy_adam = [](Trainer::Adam& ad, size_t per, size_t src, size_t cnt,
                        std::vector<double>& nm, std::vector<double>& nv,
                        bool fresh) {
        for (size_t k = 0; k < cnt; ++k) {
            nm.push_back(fresh || ad.m.empty() ? 0.0 : ad.m[src * per + k]);
            nv.push_back(fresh || ad.v.empty() ? 0.0 : ad.v[src * per + k]);
        }
    };
    std::vector<double> m_mu, v_mu, m_ls, v_ls, m_q, v_q, m_o, v_o, m_sh, v_sh;
    for (const NewEntry& e : plan) {
        Gaussian3D gsn = model_.gaussians.get(e.src);
        if (e.shrink) {
            gsn.mu += e.offset;
            gsn.scale = gsn.scale / 1.6;
        }
        next.push_back(gsn);
        nls.push_back(std::log(gsn.scale.x));
        nls.push_back(std::log(gsn.scale.y));
        nls.push_back(std::log(gsn.scale.z));
        nlo.push_back(logit(gsn.opacity));
        bool fresh = e.fresh || e.shrink;
        copy_adam(ad_mu_, 3, e.src, 3, m_mu, v_mu, fresh);
        copy_adam(ad_logscale_, 3, e.src, 3, m_ls, v_ls, fresh);
        copy_adam(ad_quat_, 4, e.src, 4, m_q, v_q, fresh);
        copy_adam(ad_logit_op_, 1, e.src, 1, m_o, v_o, fresh);
        copy_adam(ad_sh_, stride, e.src, stride, m_sh, v_sh, fresh);
    }
    model_.gaussians = std::move(next);
    raw_logscale_ = std::move(nls);
    raw_logit_op_ = std::move(nlo);
    ad_mu_.m = std::move(m_mu);
    ad_mu_.v = std::move(v_mu);
    ad_logscale_.m = std::move(m_ls);
    ad_logscale_.v = std::move(v_ls);
    ad_quat_.m = std::move(m_q);
    ad_quat_.v = std::move(v_q);
    ad_logit_op_.m = std::move(m_o);
    ad_logit_op_.v = std::move(v_o);
    ad_sh_.m = std::move(m_sh);
    ad_sh_.v = std::move(v_sh);
    densify_grad_accum_.assign(model_.gaussians.size(), 0.0);
    densify_count_.assign(model_.gaussians.size(), 0);
}

void Trainer::rebuild_gaussian_state(const std::vector<int>&,
                                     const std::vector<int>&) {}

void Trainer::run(const std::string& log_csv) {
    std::ofstream log;
    if (!log_csv.empty()) {
        log.open(log_csv);
        log << "iter,stage,total,rgb,flame,vgg,head,warp,anchor_alpha,anchor,"
               "n_gaussians,n_anchors\n";
    }
    while (iter_ < cfg_.total_iters()) {
        int it = iter_;
        LossBreakdown L = step();
        if (log.is_open()) {
            log << it << ',' << cfg_.stage_at(it) << ',' << L.total << ','
                << L.rgb << ',' << L.flame << ',' << L.vgg << ',' << L.head
                << ',' << L.warp << ',' << L.anchor_alpha << ',' << L.anchor
                << ',' << model_.gaussians.size() << ','
                << model_.anchors.size() << '\n';
            if (it % 100 == 0) log.flush();
        }
    }
}

// ---------------------------------------------------------------------------
// Test-time per-frame refinement (finite differences on theta/psi).

FrameParams finetune_frame(const AvatarModel& model, const FrameData& frame,
                           const RenderOptions& opts, double lr, int iters) {
    FrameParams p = frame.params;
    double t_norm = 0;  // encoding refreshed from the updated parameters
    auto eval = [&](const FrameParams& fp) {
        std::vector<double> enc =
            encode_frame(fp, fp.cam.width, fp.cam.height, t_norm);
        Framebuffer fb = render_avatar(model, fp, enc, opts, false);
        return loss_rgb(fb.rgb, frame.gt);
    };
    const double eps = 1e-3;
    for (int it = 0; it < iters; ++it) {
        FrameParams grad = p;
        for (size_t j = 1; j < p.theta.size(); ++j)
            for (int c = 0; c < 3; ++c) {
                FrameParams fp = p;
                fp.theta[j][c] += eps;
                double lp = eval(fp);
                fp.theta[j][c] -= 2 * eps;
                double lm = eval(fp);
                grad.theta[j][c] = (lp - lm) / (2 * eps);
            }
        std::vector<double> gpsi(p.psi.size(), 0.0);
        for (size_t e = 0; e < p.psi.size(); ++e) {
            FrameParams fp = p;
            fp.psi[e] += eps;
            double lp = eval(fp);
            fp.psi[e] -= 2 * eps;
            double lm = eval(fp);
            gpsi[e] = (lp - lm) / (2 * eps);
        }
        for (size_t j = 1; j < p.theta.size(); ++j)
            for (int c = 0; c < 3; ++c) p.theta[j][c] -= lr * grad.theta[j][c];
        for (size_t e = 0; e < p.psi.size(); ++e) p.psi[e] -= lr * gpsi[e];
    }
    return p;
}

}  // namespace ghs
