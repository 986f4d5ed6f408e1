#include <random>

#include "doctest.h"
#include "ghs/neuraltex.hpp"

using namespace ghs;

namespace {

FrameParams make_frame() {
    FrameParams f;
    f.theta.assign(4, Vec3{0, 0, 0});
    f.theta[kNeckJoint] = {0.1, -0.05, 0.02};
    f.theta[kHeadJoint] = {-0.03, 0.2, 0.0};
    f.ldmk = {{16, 10}, {16, 22}, {6, 28}, {26, 28}};
    return f;
}

void randomize(Mlp& net, std::mt19937& rng, double sigma) {
    std::normal_distribution<double> g(0.0, sigma);
    for (auto& W : net.W)
        for (int r = 0; r < W.rows(); ++r)
            for (int c = 0; c < W.cols(); ++c) W(r, c) += g(rng);
    for (auto& b : net.b)
        for (int r = 0; r < b.size(); ++r) b(r) += g(rng);
}

}  // namespace

TEST_CASE("encoding dimensions") {
    CHECK(warp_input_dim() == 228);
    CHECK(fine_input_dim(32) == 220);
    CHECK(frame_encoding_dim() == 188);
    CHECK(pixel_encoding_dim() == 40);
    FrameParams f = make_frame();
    auto enc = encode_frame(f, 32, 32, 0.5);
    CHECK(static_cast<int>(enc.size()) == frame_encoding_dim());
}

TEST_CASE("texture initialization") {
    std::mt19937 rng(1);
    NeuralTexture tex = NeuralTexture::make(16, 12, rng, 5, 8);
    CHECK(tex.tex_h() == 26);
    CHECK(tex.tex_w() == 22);
    CHECK(tex.coarse.size() == 26u * 22 * 3);
    CHECK(tex.latent.size() == 26u * 22 * 8);
    for (double v : tex.coarse) CHECK(v == doctest::Approx(1.0));
    for (double v : tex.latent) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("zero warp net maps view to padded texture coordinates") {
    std::mt19937 rng(2);
    WarpNet wnet = WarpNet::make(rng, 32, 2);
    FrameParams f = make_frame();
    auto enc = encode_frame(f, 32, 32, 0.0);
    Vec2 xt = warp({10, 20}, enc, 32, 32, 50, wnet);
    CHECK(xt.x == doctest::Approx(60.0));
    CHECK(xt.y == doctest::Approx(70.0));
}

TEST_CASE("white texture with zero nets renders white") {
    std::mt19937 rng(3);
    NeuralTexture tex = NeuralTexture::make(32, 32, rng, 10, 8);
    WarpNet wnet = WarpNet::make(rng, 32, 2);
    FineNet fnet = FineNet::make(8, rng, 32, 2);
    FrameParams f = make_frame();
    auto enc = encode_frame(f, 32, 32, 0.3);
    Vec3 c = textured_color({15.5, 7.2}, enc, 32, 32, tex, wnet, fnet);
    CHECK(c.x == doctest::Approx(1.0));
    CHECK(c.y == doctest::Approx(1.0));
    CHECK(c.z == doctest::Approx(1.0));
}

TEST_CASE("single texel shows through at the warped position") {
    std::mt19937 rng(4);
    NeuralTexture tex = NeuralTexture::make(32, 32, rng, 10, 8);
    WarpNet wnet = WarpNet::make(rng, 32, 2);
    FineNet fnet = FineNet::make(8, rng, 32, 2);
    // View pixel (6, 9) lands on texel (16, 19) with zero warp and pad 10.
    int ti = (19 * tex.tex_w() + 16) * 3;
    tex.coarse[ti] = 0.0;      // red channel dropped
    tex.coarse[ti + 1] = 0.25;
    FrameParams f = make_frame();
    auto enc = encode_frame(f, 32, 32, 0.0);
    Vec3 c = textured_color({6, 9}, enc, 32, 32, tex, wnet, fnet);
    CHECK(c.x == doctest::Approx(0.0));
    CHECK(c.y == doctest::Approx(0.25));
    CHECK(c.z == doctest::Approx(1.0));
}

TEST_CASE("stride-1 body render matches per-pixel evaluation") {
    std::mt19937 rng(5);
    NeuralTexture tex = NeuralTexture::make(16, 16, rng, 8, 8);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& v : tex.coarse) v = u(rng);
    WarpNet wnet = WarpNet::make(rng, 32, 2);
    FineNet fnet = FineNet::make(8, rng, 32, 2);
    randomize(wnet.net, rng, 0.05);
    randomize(fnet.net, rng, 0.2);

    FrameParams f = make_frame();
    auto enc = encode_frame(f, 16, 16, 0.7);
    BodyTexRender r = render_body_texture(tex, wnet, fnet, enc, 16, 16, 1);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            Vec3 want = textured_color({double(x), double(y)}, enc, 16, 16, tex,
                                       wnet, fnet);
            Vec3 got = r.color.rgb_at(y, x);
            CHECK((got - want).norm() < 1e-10);
            Vec2 xt = warp({double(x), double(y)}, enc, 16, 16, tex.pad, wnet);
            Vec2 dx{xt.x - x - tex.pad, xt.y - y - tex.pad};
            CHECK(std::abs(r.warp.at(y, x, 0) - dx.x) < 1e-10);
            CHECK(std::abs(r.warp.at(y, x, 1) - dx.y) < 1e-10);
        }
}

TEST_CASE("strided render is exact at grid nodes") {
    std::mt19937 rng(6);
    NeuralTexture tex = NeuralTexture::make(16, 16, rng, 8, 8);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& v : tex.coarse) v = u(rng);
    WarpNet wnet = WarpNet::make(rng, 32, 2);
    FineNet fnet = FineNet::make(8, rng, 32, 2);
    randomize(wnet.net, rng, 0.05);
    randomize(fnet.net, rng, 0.2);

    FrameParams f = make_frame();
    auto enc = encode_frame(f, 16, 16, 0.2);
    BodyTexRender coarse = render_body_texture(tex, wnet, fnet, enc, 16, 16, 4);
    for (int y : {0, 4, 8, 12, 15})
        for (int x : {0, 4, 8, 12, 15}) {
            Vec3 want = textured_color({double(x), double(y)}, enc, 16, 16, tex,
                                       wnet, fnet);
            CHECK((coarse.color.rgb_at(y, x) - want).norm() < 1e-10);
        }
}

TEST_CASE("baked flat texture with zero fine net equals the coarse texture") {
    std::mt19937 rng(7);
    NeuralTexture tex = NeuralTexture::make(12, 12, rng, 6, 8);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& v : tex.coarse) v = u(rng);
    FineNet fnet = FineNet::make(8, rng, 32, 2);
    FrameParams f = make_frame();
    auto enc = encode_frame(f, 12, 12, 0.0);
    Image flat = bake_flat_texture(tex, fnet, enc);
    REQUIRE(flat.h == tex.tex_h());
    REQUIRE(flat.w == tex.tex_w());
    for (int y = 0; y < flat.h; ++y)
        for (int x = 0; x < flat.w; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(flat.at(y, x, c) ==
                      doctest::Approx(tex.coarse[(y * flat.w + x) * 3 + c]));
}

TEST_CASE("baked flat texture matches the fine-color formula per texel") {
    std::mt19937 rng(8);
    NeuralTexture tex = NeuralTexture::make(8, 8, rng, 4, 8);
    FineNet fnet = FineNet::make(8, rng, 32, 2);
    randomize(fnet.net, rng, 0.3);
    FrameParams f = make_frame();
    auto enc = encode_frame(f, 8, 8, 0.9);
    Image flat = bake_flat_texture(tex, fnet, enc);

    int tw = tex.tex_w();
    for (int y : {0, 5, 15})
        for (int x : {2, 9, 14}) {
            std::vector<double> in;
            for (int d = 0; d < tex.latent_dim; ++d)
                in.push_back(tex.latent[(y * tw + x) * tex.latent_dim + d]);
            in.insert(in.end(), enc.begin(), enc.end());
            Eigen::MatrixXd X(1, in.size());
            for (size_t i = 0; i < in.size(); ++i) X(0, i) = in[i];
            Eigen::MatrixXd Y = fnet.net.forward(X);
            for (int c = 0; c < 3; ++c) {
                double want = tex.coarse[(y * tw + x) * 3 + c] +
                              0.5 * std::tanh(Y(0, c));
                CHECK(flat.at(y, x, c) == doctest::Approx(want).epsilon(1e-10));
            }
        }
}
