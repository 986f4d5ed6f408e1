// Command-line front end: synthetic data generation, fitting, rendering,
// baking and the fast / reenactment render paths.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ghs/fastpath.hpp"
#include "ghs/synthetic.hpp"
#include "ghs/trainer.hpp"

namespace fs = std::filesystem;
using namespace ghs;

namespace {

struct GlobalOpts {
    std::string preset = "desk";
    unsigned seed = 1;
    int threads = 1;
    std::string out;
};

std::string frame_name(const std::string& dir, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04d.png", i);
    return (fs::path(dir) / buf).string();
}

// Every k-th frame (k = held_out_every) is held out; frame 0 always trains so
// it can serve as the canonical frame.
void split_frames(const std::vector<FrameData>& all, int k,
                  std::vector<FrameData>& train, std::vector<FrameData>& test) {
    for (size_t i = 0; i < all.size(); ++i) {
        if (k > 0 && i % k == static_cast<size_t>(k - 1))
            test.push_back(all[i]);
        else
            train.push_back(all[i]);
    }
}

AvatarModel init_model(const Rig& rig, int img_h, int img_w, unsigned seed) {
    std::mt19937 rng(seed);
    AvatarModel m;
    m.rig = rig;
    m.gaussians = init_gaussians_from_rig(rig, rng);
    m.deform = DeformNet::make(rig, rng);
    m.tex = NeuralTexture::make(img_h, img_w, rng);
    m.wnet = WarpNet::make(rng);
    m.fnet = FineNet::make(m.tex.latent_dim, rng);
    return m;
}

double mean_test_psnr(const AvatarModel& model,
                      const std::vector<FrameData>& test,
                      const RenderOptions& opts) {
    if (test.empty()) return 0;
    double sum = 0;
    for (const FrameData& f : test) {
        Framebuffer fb = render_avatar(model, f.params, f.frame_enc, opts);
        sum += psnr(fb.rgb, f.gt);
    }
    return sum / test.size();
}

int cmd_make_synthetic(const GlobalOpts& g, int frames, double motion) {
    SyntheticConfig cfg;
    cfg.seed = g.seed;
    cfg.motion_scale = motion;
    if (g.preset == "full") {
        cfg.width = cfg.height = 512;
        cfg.n_frames = frames > 0 ? frames : 240;
        cfg.n_head_gaussians = 1024;
    } else {
        cfg.n_frames = frames > 0 ? frames : 48;
    }
    make_synthetic(cfg, g.out);
    std::printf("wrote %d frames to %s\n", cfg.n_frames, g.out.c_str());
    return 0;
}

int cmd_fit(const GlobalOpts& g, const std::string& data,
            const std::string& log_csv) {
    FrameSequence seq = load_sequence((fs::path(data) / "sequence.jsonl").string());
    Rig rig = load_rig((fs::path(data) / "rig.rig").string());
    std::vector<FrameData> all = load_frame_data(seq);
    TrainConfig cfg =
        g.preset == "full" ? TrainConfig{} : TrainConfig::desk();
    cfg.seed = g.seed;
    cfg.threads = g.threads;

    std::vector<FrameData> train, test;
    split_frames(all, cfg.held_out_every, train, test);
    const Camera& cam = all.front().params.cam;

    AvatarModel model = init_model(rig, cam.height, cam.width, g.seed);
    Trainer trainer(std::move(model), std::move(train), cfg);
    trainer.run(log_csv);

    RenderOptions opts;
    opts.render_anchors = false;
    opts.warp_grid_stride = cfg.warp_grid_stride;
    opts.threads = g.threads;
    std::printf("held-out PSNR: %.2f dB over %zu frames\n",
                mean_test_psnr(trainer.model(), test, opts), test.size());

    save_avatar(g.out, trainer.model());
    std::printf("wrote %s\n", g.out.c_str());
    return 0;
}

int cmd_render(const GlobalOpts& g, const std::string& avatar_path,
               const std::string& seq_path, int finetune_iters) {
    AvatarModel model = load_avatar(avatar_path);
    FrameSequence seq = load_sequence(seq_path);
    std::vector<FrameData> frames = load_frame_data(seq);
    fs::create_directories(g.out);

    RenderOptions opts;
    opts.render_anchors = false;
    opts.threads = g.threads;
    double sum_psnr = 0;
    int n_gt = 0;
    for (size_t i = 0; i < frames.size(); ++i) {
        FrameData& f = frames[i];
        if (finetune_iters > 0 && !f.gt.data.empty())
            f.params = finetune_frame(model, f, opts, 1e-4, finetune_iters);
        Framebuffer fb = render_avatar(model, f.params, f.frame_enc, opts);
        write_png(frame_name(g.out, static_cast<int>(i)), fb.rgb);
        if (!f.gt.data.empty()) {
            sum_psnr += psnr(fb.rgb, f.gt);
            ++n_gt;
        }
    }
    if (n_gt > 0)
        std::printf("mean PSNR: %.2f dB over %d frames\n", sum_psnr / n_gt,
                    n_gt);
    std::printf("wrote %zu frames to %s\n", frames.size(), g.out.c_str());
    return 0;
}

int cmd_bake(const GlobalOpts& g, const std::string& avatar_path,
             const std::string& seq_path, const std::string& mask_path) {
    AvatarModel model = load_avatar(avatar_path);
    FrameSequence seq = load_sequence(seq_path);
    std::vector<FrameParams> params;
    for (const auto& f : seq.frames) params.push_back(f);
    Image bg_mask;
    if (!mask_path.empty()) bg_mask = read_png(mask_path);
    std::vector<double> enc =
        encode_frame(params.front(), params.front().cam.width,
                     params.front().cam.height, seq.t_norm(0));
    BakedAvatar baked = bake_avatar(model, params, 0, enc, bg_mask, g.seed);
    save_baked(g.out, baked);
    std::printf("wrote %s (%d anchors kept)\n", g.out.c_str(),
                baked.anchors.size());
    return 0;
}

int cmd_render_fast(const GlobalOpts& g, const std::string& baked_path,
                    const std::string& seq_path) {
    BakedAvatar baked = load_baked(baked_path);
    FrameSequence seq = load_sequence(seq_path);
    fs::create_directories(g.out);
    FastRenderState state;
    for (int i = 0; i < seq.size(); ++i) {
        Framebuffer fb =
            render_fast(baked, seq.frames[i], &state, g.threads);
        write_png(frame_name(g.out, i), fb.rgb);
    }
    std::printf("wrote %d frames to %s\n", seq.size(), g.out.c_str());
    return 0;
}

// Cross-reenactment: full model driven by another sequence, with the extra
// Euclidean alignment fitted on the warped anchor pixels each frame.
int cmd_reenact(const GlobalOpts& g, const std::string& avatar_path,
                const std::string& seq_path) {
    AvatarModel model = load_avatar(avatar_path);
    FrameSequence seq = load_sequence(seq_path);
    fs::create_directories(g.out);

    for (int fi = 0; fi < seq.size(); ++fi) {
        const FrameParams& frame = seq.frames[fi];
        const Camera& cam = frame.cam;
        std::vector<double> enc =
            encode_frame(frame, cam.width, cam.height, seq.t_norm(fi));

        Rigid2D align;  // identity when anchors are unusable
        std::vector<Vec3> world =
            anchor_world_positions(model.anchors, model.rig, model.deform, frame);
        AnchorProjection proj = project_anchor_pixels(world, cam);
        std::vector<Vec2> warped, target;
        for (int i = 0; i < model.anchors.size(); ++i)
            if (proj.valid[i]) {
                warped.push_back(warp(proj.px[i], enc, cam.width, cam.height,
                                      model.tex.pad, model.wnet));
                target.push_back(model.anchors.target_uv[i]);
            }
        if (warped.size() >= 2) align = euclidean_align(warped, target);

        // Body: bake the fine texture at this conditioning, then sample it at
        // the aligned warped coordinates.
        Image flat = bake_flat_texture(model.tex, model.fnet, enc);
        BodyTexRender warp_only = render_body_texture(
            model.tex, model.wnet, model.fnet, enc, cam.width, cam.height, 2);
        Image body(cam.height, cam.width, 3);
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                Vec2 xt{x + model.tex.pad + warp_only.warp.at(y, x, 0),
                        y + model.tex.pad + warp_only.warp.at(y, x, 1)};
                Vec2 a = align.apply(xt);
                double rgb[3];
                bilinear_sample(flat.data.data(), flat.h, flat.w, 3, a, rgb);
                body.set_rgb(y, x, {rgb[0], rgb[1], rgb[2]});
            }

        // Head layer over the aligned body (anchor terms zero).
        Framebuffer fb;
        {
            SkinningFrame sk = compute_skinning(model.rig, frame);
            Eigen::MatrixXd X(model.gaussians.size(), 3);
            for (int i = 0; i < model.gaussians.size(); ++i)
                X.row(i) << model.gaussians.mu[i].x, model.gaussians.mu[i].y,
                    model.gaussians.mu[i].z;
            DeformOutputs d = deform_net_eval(model.deform, X);
            std::vector<Splat2D> splats;
            int stride = model.gaussians.sh_stride();
            std::vector<double> sh(stride);
            for (int i = 0; i < model.gaussians.size(); ++i) {
                LbsResult r = lbs_transform(
                    model.rig, frame.psi, sk, model.gaussians.mu[i],
                    d.expr.row(i).data(), d.pose.row(i).data(),
                    d.lbs_w.row(i).data());
                Vec3 mu_w = r.R * model.gaussians.mu[i] + r.T;
                Mat3 cov = build_covariance(model.gaussians.scale[i],
                                            model.gaussians.quat[i]);
                Mat3 cov_w = r.R * cov * r.R.transpose();
                Vec3 mu_cam = cam.to_camera(mu_w);
                Mat3 cov_cam = cam.world_to_cam_rot * cov_w *
                               cam.world_to_cam_rot.transpose();
                auto p = project_gaussian(mu_cam, cov_cam, cam);
                if (!p) continue;
                std::copy_n(
                    &model.gaussians.sh[static_cast<size_t>(i) * stride],
                    stride, sh.begin());
                splats.push_back({p->mu2d, p->cov2d, p->depth,
                                  sh_to_rgb(sh, mu_cam.normalized()),
                                  model.gaussians.opacity[i]});
            }
            RenderLayer head =
                splat_layer(splats, cam.width, cam.height, g.threads);
            RenderLayer empty(cam.height, cam.width);
            fb = composite(empty, head, body, Vec3{1, 1, 1}, true);
        }
        write_png(frame_name(g.out, fi), fb.rgb);
    }
    std::printf("wrote %d frames to %s\n", seq.size(), g.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid Gaussian head + warped neural body texture avatars"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--preset", g.preset, "desk or full")
        ->check(CLI::IsMember({"desk", "full"}));
    app.add_option("--seed", g.seed, "RNG seed");
    app.add_option("--threads", g.threads, "worker threads");
    app.add_option("--out", g.out, "output path");
    app.fallthrough();

    auto* mk = app.add_subcommand("make-synthetic", "generate synthetic scene");
    int mk_frames = 0;
    double mk_motion = 1.0;
    mk->add_option("--frames", mk_frames, "frame count (0 = preset default)");
    mk->add_option("--motion-scale", mk_motion, "motion amplitude scale");

    auto* fit = app.add_subcommand("fit", "train an avatar");
    std::string fit_data, fit_log;
    fit->add_option("--data", fit_data, "directory with sequence.jsonl + rig.rig")
        ->required();
    fit->add_option("--log", fit_log, "CSV training log path");

    auto* ren = app.add_subcommand("render", "render with the full model");
    std::string ren_avatar, ren_seq;
    int ren_finetune = 0;
    ren->add_option("--avatar", ren_avatar, ".ghsa avatar")->required();
    ren->add_option("--seq", ren_seq, "frame sequence")->required();
    ren->add_option("--finetune-frames", ren_finetune,
                    "per-frame tracking refinement iterations");

    auto* bake = app.add_subcommand("bake", "bake the MLP-free avatar");
    std::string bake_avatar_p, bake_seq, bake_mask;
    bake->add_option("--avatar", bake_avatar_p, ".ghsa avatar")->required();
    bake->add_option("--seq", bake_seq, "training frame sequence")->required();
    bake->add_option("--bg-mask", bake_mask,
                     "texture-space background mask PNG");

    auto* rf = app.add_subcommand("render-fast", "render from a baked avatar");
    std::string rf_baked, rf_seq;
    rf->add_option("--baked", rf_baked, ".baked avatar")->required();
    rf->add_option("--seq", rf_seq, "frame sequence")->required();

    auto* re = app.add_subcommand("reenact", "cross-reenactment render");
    std::string re_avatar, re_seq;
    re->add_option("--avatar", re_avatar, ".ghsa avatar")->required();
    re->add_option("--seq", re_seq, "driving frame sequence")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (mk->parsed()) return cmd_make_synthetic(g, mk_frames, mk_motion);
        if (fit->parsed()) return cmd_fit(g, fit_data, fit_log);
        if (ren->parsed())
            return cmd_render(g, ren_avatar, ren_seq, ren_finetune);
        if (bake->parsed()) return cmd_bake(g, bake_avatar_p, bake_seq, bake_mask);
        if (rf->parsed()) return cmd_render_fast(g, rf_baked, rf_seq);
        if (re->parsed()) return cmd_reenact(g, re_avatar, re_seq);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
