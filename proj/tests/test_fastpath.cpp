#include <cstdio>
#include <fstream>
#include <random>

#include "doctest.h"
#include "ghs/fastpath.hpp"
#include "ghs/trainer.hpp"

using namespace ghs;

namespace {

void randomize(Mlp& net, std::mt19937& rng, double sigma) {
    std::normal_distribution<double> g(0.0, sigma);
    for (auto& W : net.W)
        for (int r = 0; r < W.rows(); ++r)
            for (int c = 0; c < W.cols(); ++c) W(r, c) += g(rng);
    for (auto& b : net.b)
        for (int r = 0; r < b.size(); ++r) b(r) += g(rng);
}

FrameParams simple_frame(const Rig& rig, int img) {
    FrameParams f;
    f.theta.assign(rig.n_joints, Vec3{0, 0, 0});
    f.psi.assign(rig.n_expr, 0.0);
    f.cam.fx = f.cam.fy = img * 1.2;
    f.cam.cx = f.cam.cy = img / 2.0;
    f.cam.width = f.cam.height = img;
    f.cam.world_to_cam_t = {0, -0.25, 1.4};
    f.ldmk = {{img * 0.5, img * 0.3},
              {img * 0.5, img * 0.55},
              {img * 0.3, img * 0.7},
              {img * 0.7, img * 0.7}};
    return f;
}

}  // namespace

TEST_CASE("bake_texture whitens the background") {
    std::mt19937 rng(1);
    NeuralTexture tex = NeuralTexture::make(8, 8, rng, 4, 4);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& v : tex.coarse) v = 0.3 * u(rng);
    FineNet fnet = FineNet::make(4, rng, 16, 2);

    FrameParams f = simple_frame(make_toy_rig(1), 8);
    auto enc = encode_frame(f, 8, 8, 0.0);

    // Foreground mask covers the left half of the texture.
    Image mask(tex.tex_h(), tex.tex_w(), 1, 0.0);
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w / 2; ++x) mask.at(y, x, 0) = 1.0;

    Image flat = bake_texture(tex, fnet, enc, mask);
    for (int y = 0; y < flat.h; ++y)
        for (int x = 0; x < flat.w; ++x) {
            if (x < mask.w / 2) {
                // zero fine net: coarse passes through
                CHECK(flat.at(y, x, 0) ==
                      doctest::Approx(tex.coarse[(y * flat.w + x) * 3]));
            } else {
                CHECK(flat.at(y, x, 0) == doctest::Approx(1.0));
                CHECK(flat.at(y, x, 2) == doctest::Approx(1.0));
            }
        }

    // Empty mask: no cleaning.
    Image flat2 = bake_texture(tex, fnet, enc, Image());
    CHECK(flat2.at(0, flat2.w - 1, 0) ==
          doctest::Approx(tex.coarse[(0 * flat2.w + flat2.w - 1) * 3]));

    Image bad(3, 3, 1, 0.0);
    CHECK_THROWS_AS(bake_texture(tex, fnet, enc, bad), ShapeError);
}

TEST_CASE("refresh_correspondences with a zero warp net") {
    Rig rig = make_toy_rig(1);
    std::mt19937 rng(2);
    DeformNet net = DeformNet::make(rig, rng, 16, 2);
    WarpNet wnet = WarpNet::make(rng, 16, 2);
    const int img = 32;
    FrameParams f = simple_frame(rig, img);
    auto enc = encode_frame(f, img, img, 0.0);

    AnchorSet a;
    for (int i = 0; i < 5; ++i) {
        a.mu.push_back({-0.2 + 0.1 * i, 0.3, 0.0});
        a.scale.push_back(0.02);
        a.rgb.push_back({0.5, 0.5, 0.5});
        a.opacity.push_back(0.5);
        a.target_uv.push_back({999, 999});  // stale, must be replaced
    }
    AnchorSet out = refresh_correspondences(a, rig, net, wnet, f, enc, 7);
    REQUIRE(out.size() == 5);
    for (int i = 0; i < out.size(); ++i) {
        Vec2 px = f.cam.project(f.cam.to_camera(out.mu[i]));
        CHECK(out.target_uv[i].x == doctest::Approx(px.x + 7).epsilon(1e-9));
        CHECK(out.target_uv[i].y == doctest::Approx(px.y + 7).epsilon(1e-9));
    }

    // Behind-camera anchors are dropped; fewer than 4 survivors throw.
    AnchorSet mixed = a;
    mixed.mu[0] = {0, 0, -5};
    AnchorSet out2 = refresh_correspondences(mixed, rig, net, wnet, f, enc, 7);
    CHECK(out2.size() == 4);

    AnchorSet tiny;
    for (int i = 0; i < 3; ++i) {
        tiny.mu.push_back({0.05 * i, 0.3, 0.0});
        tiny.scale.push_back(0.02);
        tiny.rgb.push_back({0.5, 0.5, 0.5});
        tiny.opacity.push_back(0.5);
        tiny.target_uv.push_back({0, 0});
    }
    CHECK_THROWS_AS(refresh_correspondences(tiny, rig, net, wnet, f, enc, 7),
                    InsufficientAnchors);
}

TEST_CASE("RANSAC keeps consistent correspondences and rejects outliers") {
    std::mt19937 scene_rng(3);
    std::uniform_real_distribution<double> u(0, 100);

    Mat3 H = Mat3::identity();
    H(0, 0) = 1.1;
    H(0, 2) = 8;
    H(1, 1) = 0.95;
    H(1, 2) = -5;
    H(2, 0) = 5e-4;

    int ok = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        std::mt19937 rng(1000 + t);
        std::vector<Vec2> src, dst;
        for (int i = 0; i < 40; ++i) {
            Vec2 p{u(rng), u(rng)};
            src.push_back(p);
            dst.push_back(apply_homography(H, p));
        }
        // 10% outliers: indices 0..3 displaced by 50 px.
        for (int i = 0; i < 4; ++i) dst[i] += Vec2{50, 35};
        auto inliers = ransac_homography_inliers(src, dst, rng);
        bool exact = true;
        for (int i = 0; i < 40; ++i)
            if (inliers[i] != (i >= 4)) exact = false;
        if (exact) ++ok;
    }
    CHECK(ok >= 95);
}

TEST_CASE("RANSAC all-inlier case keeps everything") {
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> u(0, 50);
    std::vector<Vec2> src, dst;
    for (int i = 0; i < 12; ++i) {
        Vec2 p{u(rng), u(rng)};
        src.push_back(p);
        dst.push_back({p.x + 3, p.y - 2});
    }
    auto inliers = ransac_homography_inliers(src, dst, rng);
    for (bool b : inliers) CHECK(b);
}

TEST_CASE("euclidean alignment") {
    std::vector<Vec2> src{{0, 0}, {1, 0}, {0, 1}, {2, 3}};

    Rigid2D id = euclidean_align(src, src);
    CHECK(std::abs(id.R(0, 0) - 1) < 1e-12);
    CHECK(id.t.norm() < 1e-12);

    std::vector<Vec2> shifted;
    for (auto& p : src) shifted.push_back({p.x + 5, p.y - 2});
    Rigid2D tr = euclidean_align(src, shifted);
    CHECK(std::abs(tr.t.x - 5) < 1e-12);
    CHECK(std::abs(tr.t.y + 2) < 1e-12);

    // Random rigid motions are recovered exactly.
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 10; ++t) {
        double ang = 3.0 * u(rng);
        Mat2 R{{{std::cos(ang), -std::sin(ang)}, {std::sin(ang), std::cos(ang)}}};
        Vec2 off{10 * u(rng), 10 * u(rng)};
        std::vector<Vec2> a, b;
        for (int i = 0; i < 7; ++i) {
            Vec2 p{5 * u(rng), 5 * u(rng)};
            a.push_back(p);
            b.push_back(R * p + off);
        }
        Rigid2D fit = euclidean_align(a, b);
        CHECK(fit.R.det() == doctest::Approx(1.0).epsilon(1e-9));
        for (int i = 0; i < 7; ++i)
            CHECK((fit.apply(a[i]) - b[i]).norm() < 1e-9);
    }

    CHECK_THROWS_AS(euclidean_align({{0, 0}}, {{1, 1}}), InsufficientAnchors);
}

namespace {

// Minimal trained-looking model for bake/render tests.
AvatarModel tiny_model(std::mt19937& rng, int img) {
    AvatarModel m;
    m.rig = make_toy_rig(1);
    m.deform = DeformNet::make(m.rig, rng, 16, 2);
    m.tex = NeuralTexture::make(img, img, rng, 8, 4);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& v : m.tex.coarse) v = u(rng);
    m.wnet = WarpNet::make(rng, 16, 2);
    m.fnet = FineNet::make(4, rng, 16, 2);
    randomize(m.fnet.net, rng, 0.1);

    std::normal_distribution<double> g;
    for (int i = 0; i < 8; ++i) {
        Gaussian3D gs;
        gs.mu = {0.1 * g(rng), -0.05 + 0.05 * g(rng), 0.03 * g(rng)};
        gs.scale = {0.03, 0.03, 0.03};
        gs.quat = {1, 0, 0, 0};
        gs.opacity = 0.6;
        gs.sh.assign(48, 0.0);
        gs.sh[0] = 0.6;
        m.gaussians.push_back(gs);
    }
    for (int i = 0; i < 6; ++i) {
        m.anchors.mu.push_back({-0.25 + 0.1 * i, 0.3 + 0.05 * (i % 3), 0.0});
        m.anchors.scale.push_back(0.03);
        m.anchors.rgb.push_back({u(rng), u(rng), u(rng)});
        m.anchors.opacity.push_back(0.5);
        m.anchors.target_uv.push_back({0, 0});
    }
    return m;
}

}  // namespace

TEST_CASE("bake and fast render query no MLP") {
    std::mt19937 rng(6);
    const int img = 32;
    AvatarModel m = tiny_model(rng, img);
    std::vector<FrameParams> frames;
    for (int k = 0; k < 3; ++k) {
        FrameParams f = simple_frame(m.rig, img);
        f.index = k;
        f.theta[1] = {0.02 * k, 0, 0};
        frames.push_back(f);
    }
    auto enc = encode_frame(frames[0], img, img, 0.0);
    BakedAvatar baked = bake_avatar(m, frames, 0, enc, Image(), 7);
    CHECK(baked.anchors.size() >= 4);
    CHECK(baked.head_deform.lbs_w.rows() == m.gaussians.size());

    mlp_reset_query_count();
    FastRenderState state;
    Framebuffer fb = render_fast(baked, frames[1], &state, 1);
    CHECK(mlp_query_count() == 0);
    CHECK(fb.rgb.h == img);
    CHECK(state.has_H);

    // At the canonical frame with an untouched warp net the homography is a
    // pure translation by -pad (texture frame -> flat texture lookup is
    // identity overall); rendering there matches the slow path closely.
    RenderOptions opts;
    opts.render_anchors = false;
    Framebuffer slow = render_avatar(m, frames[0], enc, opts);
    Framebuffer fast = render_fast(baked, frames[0], nullptr, 1);
    CHECK(mean_abs_error(slow.rgb, fast.rgb) < 2.0 / 255.0);
}

TEST_CASE("baked avatar round trip") {
    std::mt19937 rng(7);
    const int img = 16;
    AvatarModel m = tiny_model(rng, img);
    std::vector<FrameParams> frames{simple_frame(m.rig, img)};
    auto enc = encode_frame(frames[0], img, img, 0.0);
    BakedAvatar baked = bake_avatar(m, frames, 0, enc, Image(), 3);

    std::string p1 = "test_baked_a.baked", p2 = "test_baked_b.baked";
    save_baked(p1, baked);
    BakedAvatar back = load_baked(p1);
    CHECK(back.anchors.size() == baked.anchors.size());
    CHECK(back.gaussians.size() == baked.gaussians.size());
    CHECK(back.flat_tex.h == baked.flat_tex.h);
    CHECK(back.pad == baked.pad);
    CHECK(back.canonical_frame == baked.canonical_frame);

    save_baked(p2, back);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)),
                   std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)),
                   std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    std::remove(p1.c_str());
    std::remove(p2.c_str());

    // Rendering the loaded bake matches the original up to float32 storage.
    Framebuffer a = render_fast(baked, frames[0], nullptr, 1);
    Framebuffer b = render_fast(back, frames[0], nullptr, 1);
    CHECK(mean_abs_error(a.rgb, b.rgb) < 1e-5);
}
