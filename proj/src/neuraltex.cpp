#include "ghs/neuraltex.hpp"

#include <cmath>

namespace ghs {

namespace {

const PosEnc kEncPixel{10, false};
const PosEnc kEncPose{2, false};
const PosEnc kEncTime{2, false};
const PosEnc kEncLdmk{10, false};

double norm_coord(double v, int extent) {
    return extent > 1 ? 2.0 * v / (extent - 1) - 1.0 : 0.0;
}

/// Node grid along one axis: every `stride` pixels plus the last pixel.
std::vector<int> axis_grid(int n, int stride) {
    std::vector<int> g;
    for (int p = 0; p < n - 1; p += stride) g.push_back(p);
    g.push_back(n - 1);
    return g;
}

struct AxisInterp {
    int i0, i1;
    double f;  // weight of i1
};

AxisInterp axis_interp(const std::vector<int>& g, int p) {
    if (g.size() < 2) return {0, 0, 0.0};
    int stride = g[1] - g[0];
    int i0 = std::min(p / stride, static_cast<int>(g.size()) - 2);
    double span = g[i0 + 1] - g[i0];
    return {i0, i0 + 1, (p - g[i0]) / span};
}

}  // namespace

NeuralTexture NeuralTexture::make(int height, int width, std::mt19937& rng,
                                  int pad, int latent_dim) {
    if (height <= 0 || width <= 0 || pad < 0 || latent_dim <= 0)
        throw InvalidArgument("NeuralTexture: bad dimensions");
    NeuralTexture t;
    t.height = height;
    t.width = width;
    t.pad = pad;
    t.latent_dim = latent_dim;
    size_t hw = static_cast<size_t>(t.tex_h()) * t.tex_w();
    t.coarse.assign(hw * 3, 1.0);  // white background
    t.latent.resize(hw * latent_dim);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (auto& v : t.latent) v = uni(rng);
    return t;
}

int pixel_encoding_dim() { return kEncPixel.output_dim(2); }

int frame_encoding_dim() {
    return kEncPose.output_dim(6) + kEncTime.output_dim(1) +
           kEncLdmk.output_dim(2 * kNumLandmarks);
}

int warp_input_dim() { return pixel_encoding_dim() + frame_encoding_dim(); }

int fine_input_dim(int latent_dim) { return latent_dim + frame_encoding_dim(); }

WarpNet WarpNet::make(std::mt19937& rng, int width, int n_hidden) {
    return {Mlp::make(warp_input_dim(), width, n_hidden, 2, rng)};
}

FineNet FineNet::make(int latent_dim, std::mt19937& rng, int width,
                      int n_hidden) {
    return {Mlp::make(fine_input_dim(latent_dim), width, n_hidden, 3, rng)};
}

void encode_pixel(const Vec2& view_xy, int img_w, int img_h,
                  std::vector<double>& out) {
    kEncPixel.encode({norm_coord(view_xy.x, img_w), norm_coord(view_xy.y, img_h)},
                     out);
}

Vec2 encode_pixel_backward(const Vec2& view_xy, int img_w, int img_h,
                           const double* d_enc) {
    std::vector<double> gx, gy;
    kEncPixel.encode_grad(norm_coord(view_xy.x, img_w), gx);
    kEncPixel.encode_grad(norm_coord(view_xy.y, img_h), gy);
    double dx = 0, dy = 0;
    int per = static_cast<int>(gx.size());
    for (int k = 0; k < per; ++k) {
        dx += d_enc[k] * gx[k];
        dy += d_enc[per + k] * gy[k];
    }
    double sx = img_w > 1 ? 2.0 / (img_w - 1) : 0.0;
    double sy = img_h > 1 ? 2.0 / (img_h - 1) : 0.0;
    return {dx * sx, dy * sy};
}

std::vector<double> encode_frame(const FrameParams& frame, int img_w, int img_h,
                                 double t_norm) {
    std::vector<double> pose(6, 0.0);
    if (static_cast<int>(frame.theta.size()) > kNeckJoint) {
        pose[0] = frame.theta[kNeckJoint].x;
        pose[1] = frame.theta[kNeckJoint].y;
        pose[2] = frame.theta[kNeckJoint].z;
    }
    if (static_cast<int>(frame.theta.size()) > kHeadJoint) {
        pose[3] = frame.theta[kHeadJoint].x;
        pose[4] = frame.theta[kHeadJoint].y;
        pose[5] = frame.theta[kHeadJoint].z;
    }
    std::vector<double> ldmk(2 * kNumLandmarks, 0.0);
    for (int i = 0; i < kNumLandmarks && i < static_cast<int>(frame.ldmk.size());
         ++i) {
        ldmk[2 * i] = norm_coord(frame.ldmk[i].x, img_w);
        ldmk[2 * i + 1] = norm_coord(frame.ldmk[i].y, img_h);
    }

    std::vector<double> out;
    out.reserve(frame_encoding_dim());
    kEncPose.encode(pose, out);
    kEncTime.encode({t_norm}, out);
    kEncLdmk.encode(ldmk, out);
    return out;
}

Vec2 warp(const Vec2& view_xy, const std::vector<double>& frame_enc, int img_w,
          int img_h, int pad, const WarpNet& wnet) {
    std::vector<double> in;
    in.reserve(warp_input_dim());
    encode_pixel(view_xy, img_w, img_h, in);
    in.insert(in.end(), frame_enc.begin(), frame_enc.end());
    Eigen::MatrixXd X = Eigen::Map<const Eigen::MatrixXd>(in.data(), 1, in.size());
    Eigen::MatrixXd d = wnet.net.forward(X);
    return {view_xy.x + pad + d(0, 0), view_xy.y + pad + d(0, 1)};
}

Vec3 textured_color(const Vec2& view_xy, const std::vector<double>& frame_enc,
                    int img_w, int img_h, const NeuralTexture& tex,
                    const WarpNet& wnet, const FineNet& fnet) {
    Vec2 xt = warp(view_xy, frame_enc, img_w, img_h, tex.pad, wnet);

    std::vector<double> in(tex.latent_dim);
    bilinear_sample(tex.latent.data(), tex.tex_h(), tex.tex_w(), tex.latent_dim,
                    xt, in.data());
    in.insert(in.end(), frame_enc.begin(), frame_enc.end());
    Eigen::MatrixXd X = Eigen::Map<const Eigen::MatrixXd>(in.data(), 1, in.size());
    Eigen::MatrixXd y = fnet.net.forward(X);

    double rgb[3];
    bilinear_sample(tex.coarse.data(), tex.tex_h(), tex.tex_w(), 3, xt, rgb);
    return {rgb[0] + 0.5 * std::tanh(y(0, 0)), rgb[1] + 0.5 * std::tanh(y(0, 1)),
            rgb[2] + 0.5 * std::tanh(y(0, 2))};
}

BodyTexRender render_body_texture(const NeuralTexture& tex, const WarpNet& wnet,
                                  const FineNet& fnet,
                                  const std::vector<double>& frame_enc,
                                  int img_w, int img_h, int stride) {
    if (stride < 1) throw InvalidArgument("render_body_texture: stride < 1");
    BodyTexRender r;
    r.stride = stride;
    r.node_x = axis_grid(img_w, stride);
    r.node_y = axis_grid(img_h, stride);
    int nx = static_cast<int>(r.node_x.size());
    int ny = static_cast<int>(r.node_y.size());
    int n = nx * ny;

    Eigen::MatrixXd Xw(n, warp_input_dim());
    std::vector<double> row;
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            row.clear();
            encode_pixel({double(r.node_x[ix]), double(r.node_y[iy])}, img_w,
                         img_h, row);
            row.insert(row.end(), frame_enc.begin(), frame_enc.end());
            Xw.row(iy * nx + ix) =
                Eigen::Map<const Eigen::VectorXd>(row.data(), row.size());
        }
    r.node_warp = wnet.net.forward(Xw, &r.warp_cache);

    int dt = tex.latent_dim;
    Eigen::MatrixXd Xf(n, fine_input_dim(dt));
    std::vector<double> latent(dt);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            int k = iy * nx + ix;
            Vec2 xt{r.node_x[ix] + tex.pad + r.node_warp(k, 0),
                    r.node_y[iy] + tex.pad + r.node_warp(k, 1)};
            bilinear_sample(tex.latent.data(), tex.tex_h(), tex.tex_w(), dt, xt,
                            latent.data());
            for (int c = 0; c < dt; ++c) Xf(k, c) = latent[c];
            for (size_t c = 0; c < frame_enc.size(); ++c)
                Xf(k, dt + c) = frame_enc[c];
        }
    r.node_tanh = fnet.net.forward(Xf, &r.fine_cache).array().tanh();

    r.color = Image(img_h, img_w, 3);
    r.warp = Image(img_h, img_w, 2);
    for (int y = 0; y < img_h; ++y) {
        AxisInterp ay = axis_interp(r.node_y, y);
        for (int x = 0; x < img_w; ++x) {
            AxisInterp ax = axis_interp(r.node_x, x);
            int k00 = ay.i0 * nx + ax.i0, k01 = ay.i0 * nx + ax.i1;
            int k10 = ay.i1 * nx + ax.i0, k11 = ay.i1 * nx + ax.i1;
            double w00 = (1 - ay.f) * (1 - ax.f), w01 = (1 - ay.f) * ax.f;
            double w10 = ay.f * (1 - ax.f), w11 = ay.f * ax.f;

            double dx = w00 * r.node_warp(k00, 0) + w01 * r.node_warp(k01, 0) +
                        w10 * r.node_warp(k10, 0) + w11 * r.node_warp(k11, 0);
            double dy = w00 * r.node_warp(k00, 1) + w01 * r.node_warp(k01, 1) +
                        w10 * r.node_warp(k10, 1) + w11 * r.node_warp(k11, 1);
            r.warp.at(y, x, 0) = dx;
            r.warp.at(y, x, 1) = dy;

            Vec2 xt{x + tex.pad + dx, y + tex.pad + dy};
            double rgb[3];
            bilinear_sample(tex.coarse.data(), tex.tex_h(), tex.tex_w(), 3, xt,
                            rgb);
            for (int c = 0; c < 3; ++c) {
                double fine = w00 * r.node_tanh(k00, c) +
                              w01 * r.node_tanh(k01, c) +
                              w10 * r.node_tanh(k10, c) +
                              w11 * r.node_tanh(k11, c);
                r.color.at(y, x, c) = rgb[c] + 0.5 * fine;
            }
        }
    }
    return r;
}

BodyTexGrads make_body_tex_grads(const NeuralTexture& tex, const WarpNet& wnet,
                                 const FineNet& fnet) {
    BodyTexGrads g;
    g.d_coarse.assign(tex.coarse.size(), 0.0);
    g.d_latent.assign(tex.latent.size(), 0.0);
    g.d_warp = wnet.net.zero_grads();
    g.d_fine = fnet.net.zero_grads();
    return g;
}

void render_body_texture_backward(const NeuralTexture& tex, const WarpNet& wnet,
                                  const FineNet& fnet,
                                  const std::vector<double>& frame_enc,
                                  const BodyTexRender& fwd, const Image& d_color,
                                  const Image& d_warp, BodyTexGrads& grads) {
    (void)frame_enc;
    int img_h = fwd.color.h, img_w = fwd.color.w;
    int nx = static_cast<int>(fwd.node_x.size());
    int ny = static_cast<int>(fwd.node_y.size());
    int n = nx * ny;
    int dt = tex.latent_dim;

    Eigen::MatrixXd d_node_warp = Eigen::MatrixXd::Zero(n, 2);
    Eigen::MatrixXd d_node_tanh = Eigen::MatrixXd::Zero(n, 3);

    for (int y = 0; y < img_h; ++y) {
        AxisInterp ay = axis_interp(fwd.node_y, y);
        for (int x = 0; x < img_w; ++x) {
            AxisInterp ax = axis_interp(fwd.node_x, x);
            int k[4] = {ay.i0 * nx + ax.i0, ay.i0 * nx + ax.i1,
                        ay.i1 * nx + ax.i0, ay.i1 * nx + ax.i1};
            double w[4] = {(1 - ay.f) * (1 - ax.f), (1 - ay.f) * ax.f,
                           ay.f * (1 - ax.f), ay.f * ax.f};

            double dc[3] = {d_color.at(y, x, 0), d_color.at(y, x, 1),
                            d_color.at(y, x, 2)};
            Vec2 xt{x + tex.pad + fwd.warp.at(y, x, 0),
                    y + tex.pad + fwd.warp.at(y, x, 1)};
            Vec2 dxt = bilinear_sample_backward(tex.coarse.data(), tex.tex_h(),
                                                tex.tex_w(), 3, xt, dc,
                                                grads.d_coarse.data());
            Vec2 dwarp_px{dxt.x + d_warp.at(y, x, 0), dxt.y + d_warp.at(y, x, 1)};
            for (int i = 0; i < 4; ++i) {
                if (w[i] == 0.0) continue;
                d_node_warp(k[i], 0) += w[i] * dwarp_px.x;
                d_node_warp(k[i], 1) += w[i] * dwarp_px.y;
                for (int c = 0; c < 3; ++c)
                    d_node_tanh(k[i], c) += w[i] * 0.5 * dc[c];
            }
        }
    }

    // Through tanh, the fine net, and the latent texture sample.
    Eigen::MatrixXd dYf =
        (d_node_tanh.array() * (1.0 - fwd.node_tanh.array().square())).matrix();
    Eigen::MatrixXd dXf = fnet.net.backward(fwd.fine_cache, dYf, grads.d_fine,
                                            /*need_dx=*/true);
    std::vector<double> d_latent_sample(dt);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            int kk = iy * nx + ix;
            for (int c = 0; c < dt; ++c) d_latent_sample[c] = dXf(kk, c);
            Vec2 xt{fwd.node_x[ix] + tex.pad + fwd.node_warp(kk, 0),
                    fwd.node_y[iy] + tex.pad + fwd.node_warp(kk, 1)};
            Vec2 dxt = bilinear_sample_backward(tex.latent.data(), tex.tex_h(),
                                                tex.tex_w(), dt, xt,
                                                d_latent_sample.data(),
                                                grads.d_latent.data());
            d_node_warp(kk, 0) += dxt.x;
            d_node_warp(kk, 1) += dxt.y;
        }

    wnet.net.backward(fwd.warp_cache, d_node_warp, grads.d_warp);
}

Image bake_flat_texture(const NeuralTexture& tex, const FineNet& fnet,
                        const std::vector<double>& frame_enc) {
    int th = tex.tex_h(), tw = tex.tex_w(), dt = tex.latent_dim;
    Image out(th, tw, 3);
    Eigen::MatrixXd X(tw, fine_input_dim(dt));
    for (int y = 0; y < th; ++y) {
        for (int x = 0; x < tw; ++x) {
            size_t base = (static_cast<size_t>(y) * tw + x) * dt;
            for (int c = 0; c < dt; ++c) X(x, c) = tex.latent[base + c];
            for (size_t c = 0; c < frame_enc.size(); ++c)
                X(x, dt + c) = frame_enc[c];
        }
        Eigen::MatrixXd Y = fnet.net.forward(X);
        for (int x = 0; x < tw; ++x) {
            size_t base = (static_cast<size_t>(y) * tw + x) * 3;
            for (int c = 0; c < 3; ++c)
                out.data[base + c] =
                    tex.coarse[base + c] + 0.5 * std::tanh(Y(x, c));
        }
    }
    return out;
}

}  // namespace ghs
