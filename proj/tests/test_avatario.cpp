#include <cstdio>
#include <fstream>
#include <random>

#include "doctest.h"
#include "ghs/asset.hpp"
#include "ghs/avatar.hpp"
#include "ghs/oneeuro.hpp"
#include "ghs/sequence.hpp"
#include "ghs/synthetic.hpp"

using namespace ghs;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("blob container round trip is bit-identical") {
    std::mt19937 rng(1);
    std::uniform_real_distribution<float> u(-10, 10);
    BlobFile bf;
    bf.manifest["kind"] = "test";
    bf.manifest["n"] = 3;
    for (const char* name : {"alpha", "beta", "zz"}) {
        std::vector<float> v(257);
        for (auto& x : v) x = u(rng);
        bf.blobs[name] = v;
    }
    std::string p1 = "test_blob_a.bin", p2 = "test_blob_b.bin";
    bf.save(p1, "GTST");
    BlobFile back = BlobFile::load(p1, "GTST");
    CHECK(back.manifest.at("kind") == "test");
    CHECK(back.blobs.size() == 3);
    CHECK(back.blobs.at("alpha") == bf.blobs.at("alpha"));
    CHECK(back.blobs.at("zz") == bf.blobs.at("zz"));
    back.save(p2, "GTST");
    CHECK(read_file(p1) == read_file(p2));

    // Wrong magic and truncation are rejected.
    CHECK_THROWS_AS(BlobFile::load(p1, "XXXX"), CorruptAsset);
    std::string bytes = read_file(p1);
    write_file(p2, bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(BlobFile::load(p2, "GTST"), CorruptAsset);

    // Corrupting a blob byte breaks the checksum.
    std::string corrupt = bytes;
    corrupt[corrupt.size() - 5] ^= 0x40;
    write_file(p2, corrupt);
    CHECK_THROWS_AS(BlobFile::load(p2, "GTST"), CorruptAsset);

    // Patching the endian sentinel is rejected.
    std::string flipped = bytes;
    std::swap(flipped[8], flipped[11]);
    std::swap(flipped[9], flipped[10]);
    write_file(p2, flipped);
    CHECK_THROWS_AS(BlobFile::load(p2, "GTST"), CorruptAsset);

    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("frame sequence round trip") {
    FrameSequence seq;
    for (int i = 0; i < 4; ++i) {
        FrameParams f;
        f.index = i;
        f.timestamp = 0.04 * i;
        f.theta.assign(4, Vec3{0.01 * i, 0, -0.02 * i});
        f.psi.assign(8, 0.1 * i);
        f.cam.fx = f.cam.fy = 100;
        f.cam.cx = f.cam.cy = 64;
        f.cam.width = f.cam.height = 128;
        f.cam.world_to_cam_t = {0, 0, 1.5};
        f.ldmk = {{64, 40}, {64, 70}, {40, 90}, {88, 90}};
        f.has_nose = (i % 2 == 0);
        f.image_path = "frames/" + std::to_string(i) + ".png";
        f.head_mask_path = "masks/" + std::to_string(i) + ".png";
        seq.frames.push_back(f);
    }
    std::string path = "test_seq.jsonl";
    save_sequence(path, seq);
    FrameSequence back = load_sequence(path);
    REQUIRE(back.size() == 4);
    CHECK(back.frames[2].index == 2);
    CHECK(back.frames[3].theta[0].x == doctest::Approx(0.03));
    CHECK(back.frames[1].psi[5] == doctest::Approx(0.1));
    CHECK(back.frames[1].cam.fx == doctest::Approx(100));
    CHECK(back.frames[2].ldmk[3].x == doctest::Approx(88));
    CHECK(back.frames[1].has_nose == false);
    // Image paths come back resolved relative to the sequence file.
    CHECK(back.frames[0].image_path.find("frames/0.png") != std::string::npos);

    CHECK(seq.t_norm(0) == doctest::Approx(-1.0));
    CHECK(seq.t_norm(3) == doctest::Approx(1.0));
    std::remove(path.c_str());
}

TEST_CASE("one euro filter") {
    OneEuroFilter f;
    // Constant signal passes through unchanged.
    for (int i = 0; i < 5; ++i) {
        auto y = f.filter({2.5, -1.0}, 0.1 * i);
        CHECK(y[0] == doctest::Approx(2.5));
        CHECK(y[1] == doctest::Approx(-1.0));
    }

    // A step is smoothed: the first filtered value after the step lies
    // strictly between the old and new levels.
    f.reset();
    f.filter({0.0}, 0.0);
    auto y = f.filter({1.0}, 0.04);
    CHECK(y[0] > 0.0);
    CHECK(y[0] < 1.0);

    // Fast motion passes with less lag than slow motion.
    OneEuroFilter slow, fast;
    slow.filter({0.0}, 0.0);
    fast.filter({0.0}, 0.0);
    double lag_slow = 1.0 - slow.filter({1.0}, 1.0 / 25)[0];
    double lag_fast = 1.0 - fast.filter({100.0}, 1.0 / 25)[0] / 100.0;
    CHECK(lag_fast < lag_slow);

    // Non-increasing timestamps throw.
    OneEuroFilter g;
    g.filter({0.0}, 1.0);
    CHECK_THROWS_AS(g.filter({0.0}, 1.0), InvalidArgument);
    CHECK_THROWS_AS(g.filter({0.0}, 0.5), InvalidArgument);
}

TEST_CASE("synthetic scene determinism and structure") {
    SyntheticConfig cfg;
    cfg.width = cfg.height = 32;
    cfg.n_frames = 5;
    cfg.n_head_gaussians = 32;
    SyntheticScene a = make_synthetic(cfg);
    SyntheticScene b = make_synthetic(cfg);
    CHECK(a.seq.size() == 5);
    CHECK(a.head_gt.size() == 32);
    CHECK(a.homographies.size() == 5);
    REQUIRE(b.head_gt.size() == 32);
    CHECK((a.head_gt.mu[7] - b.head_gt.mu[7]).norm() == 0.0);

    SyntheticFrameRender fa = render_synthetic_frame(a, 2);
    SyntheticFrameRender fb = render_synthetic_frame(b, 2);
    CHECK(fa.rgb.data == fb.rgb.data);
    CHECK(fa.head_mask.data == fb.head_mask.data);
}

TEST_CASE("zero motion freezes the synthetic scene") {
    SyntheticConfig cfg;
    cfg.width = cfg.height = 24;
    cfg.n_frames = 3;
    cfg.n_head_gaussians = 16;
    cfg.motion_scale = 0.0;
    SyntheticScene s = make_synthetic(cfg);
    SyntheticFrameRender f0 = render_synthetic_frame(s, 0);
    SyntheticFrameRender f2 = render_synthetic_frame(s, 2);
    CHECK(f0.rgb.data == f2.rgb.data);
}

TEST_CASE("synthetic body obeys the stored homography") {
    SyntheticConfig cfg;
    cfg.width = cfg.height = 48;
    cfg.n_frames = 4;
    cfg.n_head_gaussians = 24;
    SyntheticScene s = make_synthetic(cfg);
    SyntheticFrameRender f = render_synthetic_frame(s, 3);
    const Mat3& H = s.homographies[3];

    int checked = 0;
    for (int y = 4; y < 44; y += 7)
        for (int x = 4; x < 44; x += 7) {
            if (f.head_mask.at(y, x, 0) != 0.0) continue;  // body pixels only
            Vec2 uv = apply_homography(H, {double(x), double(y)});
            Vec3 want = synthetic_body_color(uv, cfg.width, cfg.height);
            Vec3 got = f.rgb.rgb_at(y, x);
            CHECK((got - want).norm() < 1e-9);
            ++checked;
        }
    CHECK(checked > 10);
}

TEST_CASE("stored homographies are recoverable from correspondences") {
    SyntheticConfig cfg;
    cfg.width = cfg.height = 64;
    cfg.n_frames = 6;
    SyntheticScene s = make_synthetic(cfg);
    for (int k = 0; k < 6; ++k) {
        const Mat3& H = s.homographies[k];
        std::vector<Vec2> src, dst;
        std::mt19937 rng(100 + k);
        std::uniform_real_distribution<double> u(0, 63);
        for (int i = 0; i < 12; ++i) {
            Vec2 p{u(rng), u(rng)};
            src.push_back(p);
            dst.push_back(apply_homography(H, p));
        }
        Mat3 fit = svd_least_squares_homography(src, dst);
        // Normalize both to h33 = 1 and compare.
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(fit(i, j) / fit(2, 2) ==
                      doctest::Approx(H(i, j) / H(2, 2)).epsilon(1e-6));
    }
}

TEST_CASE("avatar asset round trip") {
    std::mt19937 rng(9);
    AvatarModel m;
    m.rig = make_toy_rig(2);
    m.deform = DeformNet::make(m.rig, rng, 16, 2);
    m.tex = NeuralTexture::make(8, 8, rng, 4, 4);
    m.wnet = WarpNet::make(rng, 16, 2);
    m.fnet = FineNet::make(4, rng, 16, 2);
    std::normal_distribution<double> g;
    for (auto& W : m.deform.net.W)
        for (int r = 0; r < W.rows(); ++r)
            for (int c = 0; c < W.cols(); ++c) W(r, c) += 0.01 * g(rng);
    for (int i = 0; i < 5; ++i) {
        Gaussian3D gs;
        gs.mu = {0.1 * g(rng), 0.1 * g(rng), 0.1 * g(rng)};
        gs.scale = {0.02, 0.03, 0.04};
        gs.quat = {1, 0.1, 0, 0};
        gs.opacity = 0.5;
        gs.sh.assign(48, 0.0);
        gs.sh[0] = 0.4;
        m.gaussians.push_back(gs);
    }
    for (int i = 0; i < 3; ++i) {
        m.anchors.mu.push_back({0.1 * i, 0.3, 0});
        m.anchors.scale.push_back(0.02);
        m.anchors.rgb.push_back({0.5, 0.6, 0.7});
        m.anchors.opacity.push_back(0.4);
        m.anchors.target_uv.push_back({10.0 + i, 20.0});
    }

    std::string p1 = "test_avatar_a.ghsa", p2 = "test_avatar_b.ghsa";
    save_avatar(p1, m);
    AvatarModel back = load_avatar(p1);
    CHECK(back.gaussians.size() == 5);
    CHECK(back.anchors.size() == 3);
    CHECK(back.tex.height == 8);
    CHECK(back.tex.pad == 4);
    CHECK(back.rig.n_joints == m.rig.n_joints);
    CHECK(back.deform.net.W.size() == m.deform.net.W.size());
    CHECK(back.anchors.target_uv[2].x == doctest::Approx(12.0));

    save_avatar(p2, back);
    CHECK(read_file(p1) == read_file(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}
