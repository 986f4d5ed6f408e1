#include <cstdio>
#include <fstream>
#include <random>

#include "doctest.h"
#include "ghs/rig.hpp"

using namespace ghs;

namespace {

FrameParams neutral_frame(const Rig& rig) {
    FrameParams f;
    f.theta.assign(rig.n_joints, Vec3{0, 0, 0});
    f.psi.assign(rig.n_expr, 0.0);
    return f;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("zero-initialized deform net outputs") {
    Rig rig = make_toy_rig(1);
    std::mt19937 rng(2);
    DeformNet net = DeformNet::make(rig, rng, 32, 2);
    DeformOutputs out = deform_net_eval(net, Vec3{0.1, 0.2, 0.05});
    CHECK(out.expr.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(out.pose.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    for (int j = 0; j < rig.n_joints; ++j)
        CHECK(out.lbs_w(0, j) == doctest::Approx(1.0 / rig.n_joints));
}

TEST_CASE("deform net eval is deterministic and batched consistently") {
    Rig rig = make_toy_rig(1);
    std::mt19937 rng(3);
    DeformNet net = DeformNet::make(rig, rng);
    std::normal_distribution<double> g(0.0, 0.1);
    for (auto& W : net.net.W)
        for (int r = 0; r < W.rows(); ++r)
            for (int c = 0; c < W.cols(); ++c) W(r, c) += g(rng);

    Eigen::MatrixXd mu(3, 3);
    mu << 0.1, 0.2, 0.0, -0.05, 0.3, 0.1, 0.0, 0.0, 0.0;
    DeformOutputs batch = deform_net_eval(net, mu);
    for (int i = 0; i < 3; ++i) {
        DeformOutputs one =
            deform_net_eval(net, Vec3{mu(i, 0), mu(i, 1), mu(i, 2)});
        CHECK((batch.expr.row(i) - one.expr.row(0)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((batch.lbs_w.row(i) - one.lbs_w.row(0)).cwiseAbs().maxCoeff() <
              1e-12);
        CHECK(batch.lbs_w.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("LBS with all weight on the static bone is the identity") {
    Rig rig = make_toy_rig(1);
    FrameParams f = neutral_frame(rig);
    f.theta[1] = {0.3, 0, 0};
    f.theta[2] = {0, 0.2, 0};
    f.theta[3] = {0, 0, 0.1};
    SkinningFrame sk = compute_skinning(rig, f);

    std::vector<double> w(rig.n_joints, 0.0);
    w[0] = 1.0;
    std::vector<double> expr(rig.n_expr * 3, 0.0), pose(rig.n_pose * 27, 0.0);
    Vec3 mu{0.07, -0.1, 0.04};
    LbsResult r = lbs_transform(rig, f.psi, sk, mu, expr.data(), pose.data(),
                                w.data());
    Vec3 out = r.R * mu + r.T;
    CHECK((out - mu).norm() < 1e-12);
}

TEST_CASE("LBS with all weight on one bone is that bone's rigid transform") {
    Rig rig = make_toy_rig(1);
    FrameParams f = neutral_frame(rig);
    f.theta[2] = {0.1, 0.4, -0.2};
    SkinningFrame sk = compute_skinning(rig, f);

    for (int b = 1; b < rig.n_joints; ++b) {
        std::vector<double> w(rig.n_joints, 0.0);
        w[b] = 1.0;
        std::vector<double> expr(rig.n_expr * 3, 0.0), pose(rig.n_pose * 27, 0.0);
        Vec3 mu{0.03, 0.12, -0.02};
        LbsResult r =
            lbs_transform(rig, f.psi, sk, mu, expr.data(), pose.data(), w.data());
        Vec3 got = r.R * mu + r.T;
        Vec3 want = sk.bone[b].R * mu + sk.bone[b].t;
        CHECK((got - want).norm() < 1e-12);
    }
}

TEST_CASE("LBS blends bone transforms linearly") {
    Rig rig = make_toy_rig(1);
    FrameParams f = neutral_frame(rig);
    f.theta[1] = {0, 0, 0.5};
    SkinningFrame sk = compute_skinning(rig, f);

    std::vector<double> w(rig.n_joints, 0.0);
    w[0] = 0.3;
    w[1] = 0.7;
    std::vector<double> expr(rig.n_expr * 3, 0.0), pose(rig.n_pose * 27, 0.0);
    Vec3 mu{0.02, 0.25, 0.0};
    LbsResult r =
        lbs_transform(rig, f.psi, sk, mu, expr.data(), pose.data(), w.data());
    Vec3 got = r.R * mu + r.T;
    Vec3 want = 0.3 * mu + 0.7 * (sk.bone[1].R * mu + sk.bone[1].t);
    CHECK((got - want).norm() < 1e-12);
}

TEST_CASE("blendshape offsets are applied before skinning") {
    Rig rig = make_toy_rig(1);
    FrameParams f = neutral_frame(rig);
    f.psi[2] = 0.8;
    f.theta[1] = {0, 0.3, 0};
    SkinningFrame sk = compute_skinning(rig, f);

    std::vector<double> w(rig.n_joints, 0.0);
    w[1] = 1.0;
    std::vector<double> expr(rig.n_expr * 3, 0.0), pose(rig.n_pose * 27, 0.0);
    expr[2 * 3 + 0] = 0.1;  // expression 2 moves x by 0.1 * psi[2]
    Vec3 mu{0.0, 0.2, 0.0};
    LbsResult r =
        lbs_transform(rig, f.psi, sk, mu, expr.data(), pose.data(), w.data());
    Vec3 got = r.R * mu + r.T;
    Vec3 mu_off = mu + Vec3{0.08, 0, 0};
    Vec3 want = sk.bone[1].R * mu_off + sk.bone[1].t;
    CHECK((got - want).norm() < 1e-12);
}

TEST_CASE("neutral pose skinning is the identity for every bone") {
    Rig rig = make_toy_rig(1);
    FrameParams f = neutral_frame(rig);
    SkinningFrame sk = compute_skinning(rig, f);
    for (int b = 0; b < rig.n_joints; ++b) {
        Vec3 p{0.1, -0.2, 0.3};
        CHECK((sk.bone[b].R * p + sk.bone[b].t - p).norm() < 1e-12);
    }
    for (double v : sk.pose_feat) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("pseudo ground-truth lookup") {
    Rig rig;
    rig.verts = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    rig.vert_lbs = {{1}, {1}, {1}};

    CHECK(pseudo_gt_lookup(rig, {0.1, 0, 0}) == 0);
    CHECK(pseudo_gt_lookup(rig, {1.9, 0, 0}) == 2);
    // Tie at the midpoint: lowest index wins.
    CHECK(pseudo_gt_lookup(rig, {0.5, 0, 0}) == 0);
    CHECK(pseudo_gt_lookup(rig, {1.5, 0, 0}) == 1);

    Rig empty;
    CHECK_THROWS_AS(pseudo_gt_lookup(empty, {0, 0, 0}), InvalidAsset);
}

TEST_CASE("pseudo ground-truth lookup matches brute force on toy rig") {
    Rig rig = make_toy_rig(5);
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> u(-0.5, 0.7);
    for (int t = 0; t < 30; ++t) {
        Vec3 mu{u(rng), u(rng), u(rng)};
        int got = pseudo_gt_lookup(rig, mu);
        int best = 0;
        double bd = 1e18;
        for (size_t v = 0; v < rig.verts.size(); ++v) {
            double d = (rig.verts[v] - mu).squared_norm();
            if (d < bd) {
                bd = d;
                best = static_cast<int>(v);
            }
        }
        CHECK(got == best);
    }
}

TEST_CASE("deform_gaussians at the neutral frame with zero net is identity") {
    Rig rig = make_toy_rig(1);
    std::mt19937 rng(7);
    DeformNet net = DeformNet::make(rig, rng);
    GaussianSet set;
    Gaussian3D g;
    g.mu = {0.05, 0.15, -0.02};
    g.scale = {0.01, 0.01, 0.01};
    g.quat = {1, 0, 0, 0};
    g.opacity = 0.5;
    g.sh.assign(48, 0.0);
    set.push_back(g);

    FrameParams f = neutral_frame(rig);
    DeformedGaussians d = deform_gaussians(set, rig, f, net);
    CHECK((d.mu[0] - g.mu).norm() < 1e-12);
    Mat3 I = d.lin[0];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(I(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
}

TEST_CASE("rig save/load round trip") {
    Rig rig = make_toy_rig(9);
    std::string p1 = "test_rig_a.rig", p2 = "test_rig_b.rig";
    save_rig(p1, rig);
    Rig back = load_rig(p1);
    CHECK(back.n_joints == rig.n_joints);
    CHECK(back.n_expr == rig.n_expr);
    CHECK(back.parents == rig.parents);
    CHECK(back.verts.size() == rig.verts.size());
    CHECK((back.verts[10] - rig.verts[10]).norm() < 1e-6);
    CHECK(back.vert_lbs[3].size() == rig.vert_lbs[3].size());

    save_rig(p2, back);
    CHECK(read_file(p1) == read_file(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}
