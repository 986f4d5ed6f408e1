#include "ghs/synthetic.hpp"

#include <cmath>
#include <filesystem>

#include "ghs/asset.hpp"
#include "ghs/image.hpp"
#include "ghs/renderer.hpp"

namespace ghs {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

Camera synthetic_camera(const SyntheticConfig& cfg) {
    Camera cam;
    cam.width = cfg.width;
    cam.height = cfg.height;
    cam.fx = cam.fy = 150.0 * cfg.width / 128.0;
    cam.cx = 0.5 * (cfg.width - 1);
    cam.cy = 0.5 * (cfg.height - 1);
    cam.world_to_cam_t = {0, -0.28, 1.2};
    return cam;
}

double smoothstep01(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3 - 2 * x);
}

}  // namespace

Vec3 synthetic_body_color(const Vec2& uv, int width, int height) {
    double u = uv.x / width, v = uv.y / height;
    // Shoulder line: high at the edges, dips behind the head in the middle.
    double vb = 0.74 - 0.20 * std::exp(-0.5 * (u - 0.5) * (u - 0.5) /
                                       (0.16 * 0.16));
    double body = smoothstep01((v - vb) * height / 2.0 + 0.5);

    double s1 = std::sin(kTwoPi * 6.0 * u) * std::sin(kTwoPi * 5.0 * v);
    Vec3 stripes{0.55 + 0.15 * s1,
                 0.45 + 0.13 * std::sin(kTwoPi * 7.0 * u + 1.0),
                 0.40 + 0.14 * std::sin(kTwoPi * 4.0 * (u + v))};
    Vec3 white{1, 1, 1};
    return white * (1.0 - body) + stripes * body;
}

Mat3 synthetic_homography(const SyntheticConfig& cfg, double t01) {
    double ms = cfg.motion_scale;
    // Driven at the same frequencies as the joint angles so the shoulder
    // motion stays expressible by the skeleton, like real cloth.
    double delta = 0.0033 * ms * std::sin(kTwoPi * 0.8 * t01);
    double s = 1.0 + 0.0016 * ms * std::sin(kTwoPi * 0.6 * t01);
    double tx = 0.4 * ms * cfg.width / 128.0 * std::sin(kTwoPi * 0.5 * t01);
    double ty = 0.24 * ms * cfg.height / 128.0 * std::sin(kTwoPi * 1.1 * t01);
    double cx = 0.5 * (cfg.width - 1), cy = 0.5 * (cfg.height - 1);

    // u = s R (x - c) + c + tau, expressed as a homography with h33 = 1.
    double ca = s * std::cos(delta), sa = s * std::sin(delta);
    Mat3 H = Mat3::identity();
    H(0, 0) = ca;
    H(0, 1) = -sa;
    H(0, 2) = cx - ca * cx + sa * cy + tx;
    H(1, 0) = sa;
    H(1, 1) = ca;
    H(1, 2) = cy - sa * cx - ca * cy + ty;
    return H;
}

SyntheticScene make_synthetic(const SyntheticConfig& cfg) {
    SyntheticScene scene;
    scene.config = cfg;
    scene.rig = make_toy_rig(cfg.seed);
    std::mt19937 rng(cfg.seed ^ 0x9e3779b9u);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    // Head cloud on a sphere around the head joint, DC-only colors that vary
    // smoothly over the surface.
    Vec3 head_center = scene.rig.rest_joints[2];
    constexpr double kShDc = 0.28209479177387814;
    for (int i = 0; i < cfg.n_head_gaussians; ++i) {
        double z = uni(rng), phi = M_PI * uni(rng);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        Vec3 dir{r * std::cos(phi), z, r * std::sin(phi)};
        double rad = 0.155 * (1.0 - 0.15 * std::abs(uni(rng)));
        Gaussian3D g;
        g.mu = head_center + dir * rad;
        g.scale = {0.02 + 0.006 * uni(rng), 0.02 + 0.006 * uni(rng),
                   0.02 + 0.006 * uni(rng)};
        g.quat = Quat{1.0, 0.15 * uni(rng), 0.15 * uni(rng), 0.15 * uni(rng)}
                     .normalized();
        g.opacity = 0.9;
        g.sh.assign(48, 0.0);
        Vec3 c{0.55 + 0.30 * std::sin(3.0 * dir.x + 1.0),
               0.45 + 0.25 * std::sin(4.0 * dir.y),
               0.50 + 0.30 * std::cos(3.0 * dir.z + 0.5)};
        g.sh[0] = (c.x - 0.5) / kShDc;
        g.sh[1] = (c.y - 0.5) / kShDc;
        g.sh[2] = (c.z - 0.5) / kShDc;
        scene.head_gt.push_back(g);
    }

    Camera cam = synthetic_camera(cfg);
    for (int f = 0; f < cfg.n_frames; ++f) {
        double t01 = cfg.n_frames > 1 ? double(f) / (cfg.n_frames - 1) : 0.0;
        double ms = cfg.motion_scale;
        FrameParams fr;
        fr.index = f;
        fr.timestamp = f / cfg.fps;
        fr.cam = cam;
        fr.theta.assign(scene.rig.n_joints, Vec3{0, 0, 0});
        fr.theta[1] = {0.02 * ms * std::sin(kTwoPi * 0.5 * t01), 0,
                       0.03 * ms * std::sin(kTwoPi * 0.8 * t01)};
        fr.theta[2] = {0.06 * ms * std::sin(kTwoPi * 1.1 * t01),
                       0.05 * ms * std::sin(kTwoPi * 0.6 * t01), 0};
        fr.theta[3] = {0.08 * ms * std::max(0.0, std::sin(kTwoPi * 1.5 * t01)),
                       0, 0};
        fr.psi.resize(scene.rig.n_expr);
        for (int e = 0; e < scene.rig.n_expr; ++e)
            fr.psi[e] =
                0.3 * ms * std::sin(kTwoPi * (0.4 + 0.15 * e) * t01 + 0.7 * e);

        Mat3 H = synthetic_homography(cfg, t01);
        scene.homographies.push_back(H);
        Mat3 Hinv = H.inverse();

        // Nose follows the head bone; body landmarks are canonical features
        // seen through the inverse body motion.
        SkinningFrame sk = compute_skinning(scene.rig, fr);
        Vec3 nose_w = sk.bone[2].apply(head_center + Vec3{0, 0, -0.19});
        fr.ldmk.push_back(cam.project(cam.to_camera(nose_w)));
        double W = cfg.width, Hh = cfg.height;
        fr.ldmk.push_back(apply_homography(Hinv, {0.50 * W, 0.58 * Hh}));
        fr.ldmk.push_back(apply_homography(Hinv, {0.22 * W, 0.78 * Hh}));
        fr.ldmk.push_back(apply_homography(Hinv, {0.78 * W, 0.78 * Hh}));
        scene.seq.frames.push_back(std::move(fr));
    }
    return scene;
}

SyntheticFrameRender render_synthetic_frame(const SyntheticScene& scene,
                                            int frame_idx) {
    const SyntheticConfig& cfg = scene.config;
    const FrameParams& fr = scene.seq.frames.at(frame_idx);
    const Mat3& H = scene.homographies.at(frame_idx);

    Image body(cfg.height, cfg.width, 3);
    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x)
            body.set_rgb(y, x,
                         synthetic_body_color(
                             apply_homography(H, {double(x), double(y)}),
                             cfg.width, cfg.height));

    SkinningFrame sk = compute_skinning(scene.rig, fr);
    const Transform& A = sk.bone[2];
    std::vector<Splat2D> splats;
    for (int i = 0; i < scene.head_gt.size(); ++i) {
        Gaussian3D g = scene.head_gt.get(i);
        Vec3 mu_w = A.apply(g.mu);
        Mat3 cov = build_covariance(g.scale, g.quat);
        Mat3 cov_w = A.R * cov * A.R.transpose();
        Vec3 mu_c = fr.cam.to_camera(mu_w);
        const Mat3& Wr = fr.cam.world_to_cam_rot;
        auto proj = project_gaussian(mu_c, Wr * cov_w * Wr.transpose(), fr.cam);
        if (!proj) continue;
        splats.push_back({proj->mu2d, proj->cov2d, proj->depth,
                          sh_to_rgb(g.sh, mu_c.normalized()), g.opacity});
    }
    RenderLayer head = splat_layer(splats, cfg.width, cfg.height);

    SyntheticFrameRender out;
    out.rgb = Image(cfg.height, cfg.width, 3);
    out.head_mask = Image(cfg.height, cfg.width, 1);
    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) {
            double a = head.alpha.at(y, x, 0);
            Vec3 c = head.color.rgb_at(y, x) + body.rgb_at(y, x) * (1.0 - a);
            out.rgb.set_rgb(y, x, {std::clamp(c.x, 0.0, 1.0),
                                   std::clamp(c.y, 0.0, 1.0),
                                   std::clamp(c.z, 0.0, 1.0)});
            out.head_mask.at(y, x, 0) = a;
        }
    return out;
}

SyntheticScene make_synthetic(const SyntheticConfig& cfg,
                              const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    SyntheticScene scene = make_synthetic(cfg);

    char name[64];
    for (int f = 0; f < cfg.n_frames; ++f) {
        SyntheticFrameRender r = render_synthetic_frame(scene, f);
        std::snprintf(name, sizeof(name), "frame_%04d.png", f);
        write_png((fs::path(out_dir) / name).string(), r.rgb);
        scene.seq.frames[f].image_path = name;
        std::snprintf(name, sizeof(name), "mask_%04d.png", f);
        write_png((fs::path(out_dir) / name).string(), r.head_mask);
        scene.seq.frames[f].head_mask_path = name;
    }
    save_sequence((fs::path(out_dir) / "sequence.jsonl").string(), scene.seq);
    save_rig((fs::path(out_dir) / "rig.rig").string(), scene.rig);
    save_synthetic_gt((fs::path(out_dir) / "gt.blob").string(), scene);
    // Reload so the in-memory sequence carries resolved absolute paths.
    scene.seq = load_sequence((fs::path(out_dir) / "sequence.jsonl").string());
    return scene;
}

void save_synthetic_gt(const std::string& path, const SyntheticScene& scene) {
    BlobFile bf;
    const SyntheticConfig& c = scene.config;
    bf.manifest["kind"] = "synthetic_gt";
    bf.manifest["width"] = c.width;
    bf.manifest["height"] = c.height;
    bf.manifest["n_frames"] = c.n_frames;
    bf.manifest["n_head_gaussians"] = c.n_head_gaussians;
    bf.manifest["motion_scale"] = c.motion_scale;
    bf.manifest["fps"] = c.fps;
    bf.manifest["seed"] = c.seed;

    std::vector<double> h;
    for (const Mat3& H : scene.homographies)
        for (int r = 0; r < 3; ++r)
            for (int cc = 0; cc < 3; ++cc) h.push_back(H(r, cc));
    bf.blobs["homographies"] = to_f32(h);

    std::vector<double> mu, scl, qt, op;
    for (int i = 0; i < scene.head_gt.size(); ++i) {
        const auto& g = scene.head_gt;
        mu.insert(mu.end(), {g.mu[i].x, g.mu[i].y, g.mu[i].z});
        scl.insert(scl.end(), {g.scale[i].x, g.scale[i].y, g.scale[i].z});
        qt.insert(qt.end(), {g.quat[i].w, g.quat[i].x, g.quat[i].y, g.quat[i].z});
        op.push_back(g.opacity[i]);
    }
    bf.blobs["head_mu"] = to_f32(mu);
    bf.blobs["head_scale"] = to_f32(scl);
    bf.blobs["head_quat"] = to_f32(qt);
    bf.blobs["head_opacity"] = to_f32(op);
    bf.blobs["head_sh"] = to_f32(scene.head_gt.sh);
    bf.save(path, "GSYN");
}

SyntheticScene load_synthetic_gt(const std::string& path,
                                 const std::string& seq_path) {
    BlobFile bf = BlobFile::load(path, "GSYN");
    SyntheticScene scene;
    SyntheticConfig& c = scene.config;
    c.width = bf.manifest.at("width");
    c.height = bf.manifest.at("height");
    c.n_frames = bf.manifest.at("n_frames");
    c.n_head_gaussians = bf.manifest.at("n_head_gaussians");
    c.motion_scale = bf.manifest.at("motion_scale");
    c.fps = bf.manifest.at("fps");
    c.seed = bf.manifest.at("seed");

    auto h = to_f64(bf.blobs.at("homographies"));
    for (size_t k = 0; k + 8 < h.size(); k += 9) {
        Mat3 H;
        for (int r = 0; r < 3; ++r)
            for (int cc = 0; cc < 3; ++cc) H(r, cc) = h[k + r * 3 + cc];
        scene.homographies.push_back(H);
    }

    auto mu = to_f64(bf.blobs.at("head_mu"));
    auto scl = to_f64(bf.blobs.at("head_scale"));
    auto qt = to_f64(bf.blobs.at("head_quat"));
    auto op = to_f64(bf.blobs.at("head_opacity"));
    scene.head_gt.sh = to_f64(bf.blobs.at("head_sh"));
    for (size_t i = 0; i < op.size(); ++i) {
        scene.head_gt.mu.push_back({mu[3 * i], mu[3 * i + 1], mu[3 * i + 2]});
        scene.head_gt.scale.push_back({scl[3 * i], scl[3 * i + 1], scl[3 * i + 2]});
        scene.head_gt.quat.push_back(
            {qt[4 * i], qt[4 * i + 1], qt[4 * i + 2], qt[4 * i + 3]});
        scene.head_gt.opacity.push_back(op[i]);
    }

    scene.rig = load_rig(
        (std::filesystem::path(path).parent_path() / "rig.rig").string());
    scene.seq = load_sequence(seq_path);
    return scene;
}

}  // namespace ghs
