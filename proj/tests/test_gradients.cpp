#include <random>

#include "doctest.h"
#include "ghs/trainer.hpp"

using namespace ghs;

// Central finite-difference checks of every trainable quantity against the
// analytic gradients from compute_loss_and_grads, on a small 8x8 scene.

namespace {

constexpr double kEps = 1e-5;
constexpr double kRelTol = 1e-3;

void check_grad(double analytic, double fd, const char* what) {
    double denom = std::max({std::abs(analytic), std::abs(fd), 1e-4});
    INFO(what << ": analytic=" << analytic << " fd=" << fd);
    CHECK(std::abs(analytic - fd) / denom < kRelTol);
}

void randomize(Mlp& net, std::mt19937& rng, double sigma) {
    std::normal_distribution<double> g(0.0, sigma);
    for (auto& W : net.W)
        for (int r = 0; r < W.rows(); ++r)
            for (int c = 0; c < W.cols(); ++c) W(r, c) += g(rng);
    for (auto& b : net.b)
        for (int r = 0; r < b.size(); ++r) b(r) += g(rng);
}

struct Scene {
    AvatarModel model;
    FrameData fd;
    LossWeights weights;
    RenderOptions opts;
};

Scene make_scene() {
    const int img = 8;
    std::mt19937 rng(41);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0, 1);

    Scene s;
    s.model.rig = make_toy_rig(3);
    s.model.deform = DeformNet::make(s.model.rig, rng, 16, 2);
    randomize(s.model.deform.net, rng, 0.02);
    s.model.tex = NeuralTexture::make(img, img, rng, 4, 4);
    for (auto& v : s.model.tex.coarse) v = 0.3 + 0.5 * u(rng);
    s.model.wnet = WarpNet::make(rng, 16, 2);
    randomize(s.model.wnet.net, rng, 0.01);
    s.model.fnet = FineNet::make(4, rng, 16, 2);
    randomize(s.model.fnet.net, rng, 0.1);

    // A handful of Gaussians spread in front of the camera.
    for (int i = 0; i < 6; ++i) {
        Gaussian3D gs;
        gs.mu = {0.25 * g(rng), 0.15 + 0.2 * g(rng), 0.05 * g(rng)};
        gs.scale = {0.05 + 0.02 * u(rng), 0.05 + 0.02 * u(rng),
                    0.05 + 0.02 * u(rng)};
        gs.quat = {1.0 + 0.1 * g(rng), 0.1 * g(rng), 0.1 * g(rng), 0.1 * g(rng)};
        gs.opacity = 0.3 + 0.4 * u(rng);
        gs.sh.assign(48, 0.0);
        for (int k = 0; k < 48; ++k) gs.sh[k] = 0.1 * g(rng);
        gs.sh[0] += 0.8;  // keep colors away from the zero clamp
        gs.sh[1] += 0.8;
        gs.sh[2] += 0.8;
        s.model.gaussians.push_back(gs);
    }

    // Anchors with slightly off-target correspondences.
    for (int i = 0; i < 4; ++i) {
        s.model.anchors.mu.push_back({0.3 * g(rng), 0.3 + 0.1 * g(rng), 0.0});
        s.model.anchors.scale.push_back(0.04 + 0.02 * u(rng));
        s.model.anchors.rgb.push_back({u(rng), u(rng), u(rng)});
        s.model.anchors.opacity.push_back(0.2 + 0.4 * u(rng));
    }

    s.fd.params.theta.assign(s.model.rig.n_joints, Vec3{0, 0, 0});
    s.fd.params.theta[1] = {0.05, -0.03, 0.02};
    s.fd.params.theta[2] = {-0.04, 0.06, 0.01};
    s.fd.params.theta[3] = {0.02, 0.01, -0.05};
    s.fd.params.psi.assign(s.model.rig.n_expr, 0.0);
    s.fd.params.psi[0] = 0.4;
    s.fd.params.psi[3] = -0.3;
    s.fd.params.cam.fx = s.fd.params.cam.fy = 9;
    s.fd.params.cam.cx = s.fd.params.cam.cy = 4;
    s.fd.params.cam.width = s.fd.params.cam.height = img;
    s.fd.params.cam.world_to_cam_t = {0, -0.2, 1.2};
    s.fd.params.ldmk = {{4, 2}, {4, 5}, {2, 7}, {6, 7}};

    // Anchor targets: projected pixel + pad + a small offset.
    {
        auto world = anchor_world_positions(s.model.anchors, s.model.rig,
                                            s.model.deform, s.fd.params);
        auto proj = project_anchor_pixels(world, s.fd.params.cam);
        for (int i = 0; i < 4; ++i) {
            REQUIRE(proj.valid[i]);
            s.model.anchors.target_uv.push_back(
                proj.px[i] +
                Vec2{4.0 + 0.3 * g(rng), 4.0 + 0.3 * g(rng)});
        }
    }

    s.fd.gt = Image(img, img, 3);
    for (auto& v : s.fd.gt.data) v = u(rng);
    s.fd.head_mask = Image(img, img, 1, 0.3);
    s.fd.frame_enc = encode_frame(s.fd.params, img, img, 0.6);

    s.weights.lambda_vgg = 0.1;
    return s;
}

double total_loss(const Scene& s, const AvatarModel& m) {
    return compute_loss_and_grads(m, s.fd, s.weights, s.opts, nullptr).total;
}

}  // namespace

TEST_CASE("gradient suite") {
    Scene s = make_scene();
    ModelGrads grads = make_model_grads(s.model);
    compute_loss_and_grads(s.model, s.fd, s.weights, s.opts, &grads);

    auto fd_check = [&](double* param, double analytic, const char* what) {
        double x0 = *param;
        *param = x0 + kEps;
        double lp = total_loss(s, s.model);
        *param = x0 - kEps;
        double lm = total_loss(s, s.model);
        *param = x0;
        check_grad(analytic, (lp - lm) / (2 * kEps), what);
    };

    SUBCASE("gaussian means") {
        for (int i = 0; i < s.model.gaussians.size(); i += 2)
            for (int c = 0; c < 3; ++c)
                fd_check(&s.model.gaussians.mu[i][c], grads.d_mu[i][c],
                         "gaussian mu");
    }
    SUBCASE("gaussian scales") {
        for (int i = 0; i < s.model.gaussians.size(); i += 2)
            for (int c = 0; c < 3; ++c)
                fd_check(&s.model.gaussians.scale[i][c], grads.d_scale[i][c],
                         "gaussian scale");
    }
    SUBCASE("gaussian quats") {
        for (int i = 0; i < s.model.gaussians.size(); i += 3) {
            fd_check(&s.model.gaussians.quat[i].w, grads.d_quat[i].w, "quat w");
            fd_check(&s.model.gaussians.quat[i].x, grads.d_quat[i].x, "quat x");
            fd_check(&s.model.gaussians.quat[i].y, grads.d_quat[i].y, "quat y");
            fd_check(&s.model.gaussians.quat[i].z, grads.d_quat[i].z, "quat z");
        }
    }
    SUBCASE("gaussian opacities") {
        for (int i = 0; i < s.model.gaussians.size(); ++i)
            fd_check(&s.model.gaussians.opacity[i], grads.d_opacity[i],
                     "gaussian opacity");
    }
    SUBCASE("gaussian SH coefficients") {
        int stride = s.model.gaussians.sh_stride();
        for (int i = 0; i < s.model.gaussians.size(); i += 3)
            for (int k : {0, 1, 2, 5, 13, 30})
                fd_check(&s.model.gaussians.sh[i * stride + k],
                         grads.d_sh[i * stride + k], "sh coeff");
    }
    SUBCASE("anchor parameters") {
        for (int i = 0; i < s.model.anchors.size(); ++i) {
            for (int c = 0; c < 3; ++c) {
                fd_check(&s.model.anchors.mu[i][c], grads.d_anchor_mu[i][c],
                         "anchor mu");
                fd_check(&s.model.anchors.rgb[i][c], grads.d_anchor_rgb[i][c],
                         "anchor rgb");
            }
            fd_check(&s.model.anchors.scale[i], grads.d_anchor_scale[i],
                     "anchor scale");
            fd_check(&s.model.anchors.opacity[i], grads.d_anchor_opacity[i],
                     "anchor opacity");
        }
    }
    SUBCASE("coarse texture") {
        // Texels actually touched by the render carry gradient; check the
        // strongest ones.
        std::vector<size_t> idx;
        for (size_t i = 0; i < grads.d_coarse.size(); ++i)
            if (std::abs(grads.d_coarse[i]) > 1e-5) idx.push_back(i);
        REQUIRE(idx.size() > 10);
        for (size_t k = 0; k < idx.size(); k += idx.size() / 10)
            fd_check(&s.model.tex.coarse[idx[k]], grads.d_coarse[idx[k]],
                     "coarse texel");
    }
    SUBCASE("latent texture") {
        std::vector<size_t> idx;
        for (size_t i = 0; i < grads.d_latent.size(); ++i)
            if (std::abs(grads.d_latent[i]) > 1e-5) idx.push_back(i);
        REQUIRE(idx.size() > 10);
        for (size_t k = 0; k < idx.size(); k += idx.size() / 10)
            fd_check(&s.model.tex.latent[idx[k]], grads.d_latent[idx[k]],
                     "latent texel");
    }
    SUBCASE("deform net weights") {
        Mlp& net = s.model.deform.net;
        for (int l = 0; l < net.n_layers(); ++l)
            for (int k = 0; k < 4; ++k) {
                int r = (k * 5) % net.W[l].rows(), c = (k * 11) % net.W[l].cols();
                fd_check(&net.W[l](r, c), grads.d_deform.W[l](r, c),
                         "deform W");
                fd_check(&net.b[l]((k * 3) % net.b[l].size()),
                         grads.d_deform.b[l]((k * 3) % net.b[l].size()),
                         "deform b");
            }
    }
    SUBCASE("warp net weights") {
        Mlp& net = s.model.wnet.net;
        for (int l = 0; l < net.n_layers(); ++l)
            for (int k = 0; k < 4; ++k) {
                int r = (k * 5) % net.W[l].rows(), c = (k * 11) % net.W[l].cols();
                fd_check(&net.W[l](r, c), grads.d_warp_net.W[l](r, c), "warp W");
                fd_check(&net.b[l]((k * 3) % net.b[l].size()),
                         grads.d_warp_net.b[l]((k * 3) % net.b[l].size()),
                         "warp b");
            }
    }
    SUBCASE("fine net weights") {
        Mlp& net = s.model.fnet.net;
        for (int l = 0; l < net.n_layers(); ++l)
            for (int k = 0; k < 4; ++k) {
                int r = (k * 5) % net.W[l].rows(), c = (k * 11) % net.W[l].cols();
                fd_check(&net.W[l](r, c), grads.d_fine_net.W[l](r, c), "fine W");
                fd_check(&net.b[l]((k * 3) % net.b[l].size()),
                         grads.d_fine_net.b[l]((k * 3) % net.b[l].size()),
                         "fine b");
            }
    }
}

TEST_CASE("serial and threaded gradients agree") {
    Scene s = make_scene();
    ModelGrads g1 = make_model_grads(s.model);
    compute_loss_and_grads(s.model, s.fd, s.weights, s.opts, &g1);
    RenderOptions opts4 = s.opts;
    opts4.threads = 4;
    ModelGrads g4 = make_model_grads(s.model);
    LossBreakdown lb1 = compute_loss_and_grads(s.model, s.fd, s.weights, s.opts,
                                               nullptr);
    LossBreakdown lb4 = compute_loss_and_grads(s.model, s.fd, s.weights, opts4,
                                               &g4);
    CHECK(std::abs(lb1.total - lb4.total) <=
          1e-6 * std::max(1.0, std::abs(lb1.total)));
    for (int i = 0; i < s.model.gaussians.size(); ++i)
        CHECK(std::abs(g1.d_opacity[i] - g4.d_opacity[i]) <=
              1e-6 * std::max(1.0, std::abs(g1.d_opacity[i])));
}
