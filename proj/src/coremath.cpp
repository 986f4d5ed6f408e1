#include "ghs/coremath.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace ghs {

// ---------------------------------------------------------------------------
// Quaternions

Mat3 quat_to_rot(const Quat& q) {
    double n = q.norm();
    if (!(n > 0)) throw InvalidQuaternion("quat_to_rot: zero-norm quaternion");
    double w = q.w / n, x = q.x / n, y = q.y / n, z = q.z / n;
    Mat3 R;
    R(0, 0) = 1 - 2 * (y * y + z * z);
    R(0, 1) = 2 * (x * y - w * z);
    R(0, 2) = 2 * (x * z + w * y);
    R(1, 0) = 2 * (x * y + w * z);
    R(1, 1) = 1 - 2 * (x * x + z * z);
    R(1, 2) = 2 * (y * z - w * x);
    R(2, 0) = 2 * (x * z - w * y);
    R(2, 1) = 2 * (y * z + w * x);
    R(2, 2) = 1 - 2 * (x * x + y * y);
    return R;
}

Quat quat_to_rot_backward(const Quat& q, const Mat3& dR) {
    double n = q.norm();
    if (!(n > 0)) throw InvalidQuaternion("quat_to_rot_backward: zero-norm quaternion");
    double w = q.w / n, x = q.x / n, y = q.y / n, z = q.z / n;

    // Gradients w.r.t. the unit quaternion components.
    double dw = dR(0, 1) * (-2 * z) + dR(0, 2) * (2 * y) + dR(1, 0) * (2 * z) +
                dR(1, 2) * (-2 * x) + dR(2, 0) * (-2 * y) + dR(2, 1) * (2 * x);
    double dx = dR(0, 1) * (2 * y) + dR(0, 2) * (2 * z) + dR(1, 0) * (2 * y) +
                dR(1, 1) * (-4 * x) + dR(1, 2) * (-2 * w) + dR(2, 0) * (2 * z) +
                dR(2, 1) * (2 * w) + dR(2, 2) * (-4 * x);
    double dy = dR(0, 0) * (-4 * y) + dR(0, 1) * (2 * x) + dR(0, 2) * (2 * w) +
                dR(1, 0) * (2 * x) + dR(1, 2) * (2 * z) + dR(2, 0) * (-2 * w) +
                dR(2, 1) * (2 * z) + dR(2, 2) * (-4 * y);
    double dz = dR(0, 0) * (-4 * z) + dR(0, 1) * (-2 * w) + dR(0, 2) * (2 * x) +
                dR(1, 0) * (2 * w) + dR(1, 1) * (-4 * z) + dR(1, 2) * (2 * y) +
                dR(2, 0) * (2 * x) + dR(2, 1) * (2 * y);

    // Through the normalization: dq = (du - u (u . du)) / n.
    double udot = w * dw + x * dx + y * dy + z * dz;
    return {(dw - w * udot) / n, (dx - x * udot) / n, (dy - y * udot) / n,
            (dz - z * udot) / n};
}

Mat3 axis_angle_to_rot(const Vec3& v) {
    double angle = v.norm();
    if (angle < 1e-12) {
        // First-order Rodrigues for tiny angles.
        Mat3 R = Mat3::identity();
        R(0, 1) = -v.z; R(0, 2) = v.y;
        R(1, 0) = v.z;  R(1, 2) = -v.x;
        R(2, 0) = -v.y; R(2, 1) = v.x;
        return R;
    }
    Vec3 a = v / angle;
    double c = std::cos(angle), s = std::sin(angle);
    Mat3 K;
    K(0, 1) = -a.z; K(0, 2) = a.y;
    K(1, 0) = a.z;  K(1, 2) = -a.x;
    K(2, 0) = -a.y; K(2, 1) = a.x;
    Mat3 R = Mat3::identity() + K * s + (K * K) * (1 - c);
    return R;
}

// ---------------------------------------------------------------------------
// Positional encoding

void PosEnc::encode(const std::vector<double>& x, std::vector<double>& out) const {
    for (double xi : x) {
        if (include_input) out.push_back(xi);
        double f = M_PI;
        for (int k = 0; k < num_frequencies; ++k, f *= 2) {
            out.push_back(std::sin(f * xi));
            out.push_back(std::cos(f * xi));
        }
    }
}

std::vector<double> PosEnc::encode(const std::vector<double>& x) const {
    std::vector<double> out;
    out.reserve(output_dim(static_cast<int>(x.size())));
    encode(x, out);
    return out;
}

void PosEnc::encode_grad(double xi, std::vector<double>& dout) const {
    if (include_input) dout.push_back(1.0);
    double f = M_PI;
    for (int k = 0; k < num_frequencies; ++k, f *= 2) {
        dout.push_back(f * std::cos(f * xi));
        dout.push_back(-f * std::sin(f * xi));
    }
}

// ---------------------------------------------------------------------------
// Spherical harmonics

namespace {
constexpr double kSH0 = 0.28209479177387814;
constexpr double kSH1 = 0.4886025119029199;
constexpr double kSH2[5] = {1.0925484305920792, -1.0925484305920792,
                            0.31539156525252005, -1.0925484305920792,
                            0.5462742152960396};
constexpr double kSH3[7] = {-0.5900435899266435, 2.890611442640554,
                            -0.4570457994644658, 0.3731763325901154,
                            -0.4570457994644658, 1.445305721320277,
                            -0.5900435899266435};
}  // namespace

int sh_degree_from_coeff_count(int n) {
    for (int d = 0; d <= 3; ++d)
        if ((d + 1) * (d + 1) == n) return d;
    throw ShapeError("sh coefficient count is not a supported (degree+1)^2");
}

void sh_basis(const Vec3& dir, int degree, double* b) {
    double x = dir.x, y = dir.y, z = dir.z;
    b[0] = kSH0;
    if (degree < 1) return;
    b[1] = -kSH1 * y;
    b[2] = kSH1 * z;
    b[3] = -kSH1 * x;
    if (degree < 2) return;
    double xx = x * x, yy = y * y, zz = z * z;
    b[4] = kSH2[0] * x * y;
    b[5] = kSH2[1] * y * z;
    b[6] = kSH2[2] * (2 * zz - xx - yy);
    b[7] = kSH2[3] * x * z;
    b[8] = kSH2[4] * (xx - yy);
    if (degree < 3) return;
    b[9] = kSH3[0] * y * (3 * xx - yy);
    b[10] = kSH3[1] * x * y * z;
    b[11] = kSH3[2] * y * (4 * zz - xx - yy);
    b[12] = kSH3[3] * z * (2 * zz - 3 * xx - 3 * yy);
    b[13] = kSH3[4] * x * (4 * zz - xx - yy);
    b[14] = kSH3[5] * z * (xx - yy);
    b[15] = kSH3[6] * x * (xx - 3 * yy);
}

void sh_basis_grad(const Vec3& dir, int degree, Vec3* g) {
    double x = dir.x, y = dir.y, z = dir.z;
    g[0] = {0, 0, 0};
    if (degree < 1) return;
    g[1] = {0, -kSH1, 0};
    g[2] = {0, 0, kSH1};
    g[3] = {-kSH1, 0, 0};
    if (degree < 2) return;
    double xx = x * x, yy = y * y, zz = z * z;
    g[4] = {kSH2[0] * y, kSH2[0] * x, 0};
    g[5] = {0, kSH2[1] * z, kSH2[1] * y};
    g[6] = {-2 * kSH2[2] * x, -2 * kSH2[2] * y, 4 * kSH2[2] * z};
    g[7] = {kSH2[3] * z, 0, kSH2[3] * x};
    g[8] = {2 * kSH2[4] * x, -2 * kSH2[4] * y, 0};
    if (degree < 3) return;
    g[9] = {kSH3[0] * 6 * x * y, kSH3[0] * (3 * xx - 3 * yy), 0};
    g[10] = {kSH3[1] * y * z, kSH3[1] * x * z, kSH3[1] * x * y};
    g[11] = {-2 * kSH3[2] * x * y, kSH3[2] * (4 * zz - xx - 3 * yy),
             kSH3[2] * 8 * y * z};
    g[12] = {-6 * kSH3[3] * x * z, -6 * kSH3[3] * y * z,
             kSH3[3] * (6 * zz - 3 * xx - 3 * yy)};
    g[13] = {kSH3[4] * (4 * zz - 3 * xx - yy), -2 * kSH3[4] * x * y,
             kSH3[4] * 8 * x * z};
    g[14] = {2 * kSH3[5] * x * z, -2 * kSH3[5] * y * z, kSH3[5] * (xx - yy)};
    g[15] = {kSH3[6] * (3 * xx - 3 * yy), -6 * kSH3[6] * x * y, 0};
}

Vec3 sh_to_rgb(const std::vector<double>& sh, const Vec3& dir) {
    if (sh.size() % 3 != 0) throw ShapeError("sh length must be a multiple of 3");
    int nb = static_cast<int>(sh.size()) / 3;
    int degree = sh_degree_from_coeff_count(nb);
    double basis[16];
    sh_basis(dir, degree, basis);
    Vec3 rgb{0.5, 0.5, 0.5};
    for (int b = 0; b < nb; ++b)
        for (int ch = 0; ch < 3; ++ch) rgb[ch] += sh[b * 3 + ch] * basis[b];
    for (int ch = 0; ch < 3; ++ch) rgb[ch] = std::max(rgb[ch], 0.0);
    return rgb;
}

Vec3 sh_to_rgb_backward(const std::vector<double>& sh, const Vec3& dir,
                        const Vec3& d_rgb, std::vector<double>& d_sh) {
    int nb = static_cast<int>(sh.size()) / 3;
    int degree = sh_degree_from_coeff_count(nb);
    double basis[16];
    Vec3 bgrad[16];
    sh_basis(dir, degree, basis);
    sh_basis_grad(dir, degree, bgrad);

    // Zero subgradient through the clamp.
    Vec3 g = d_rgb;
    for (int ch = 0; ch < 3; ++ch) {
        double v = 0.5;
        for (int b = 0; b < nb; ++b) v += sh[b * 3 + ch] * basis[b];
        if (v < 0) g[ch] = 0;
    }

    d_sh.assign(sh.size(), 0.0);
    Vec3 d_dir{0, 0, 0};
    for (int b = 0; b < nb; ++b) {
        double s = 0;
        for (int ch = 0; ch < 3; ++ch) {
            d_sh[b * 3 + ch] = basis[b] * g[ch];
            s += sh[b * 3 + ch] * g[ch];
        }
        d_dir += bgrad[b] * s;
    }
    return d_dir;
}

// ---------------------------------------------------------------------------
// Farthest point sampling

std::vector<int> farthest_point_sample(const std::vector<Vec3>& points, int k,
                                       int seed_index) {
    int n = static_cast<int>(points.size());
    if (k > n) throw InvalidArgument("farthest_point_sample: k > n");
    if (k < 0) throw InvalidArgument("farthest_point_sample: k < 0");
    if (seed_index < 0 || (n > 0 && seed_index >= n))
        throw InvalidArgument("farthest_point_sample: seed index out of range");

    std::vector<int> selected;
    if (k == 0) return selected;
    selected.reserve(k);
    selected.push_back(seed_index);

    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    for (int i = 0; i < n; ++i)
        min_d2[i] = (points[i] - points[seed_index]).squared_norm();

    while (static_cast<int>(selected.size()) < k) {
        int best = -1;
        double best_d2 = -1;
        for (int i = 0; i < n; ++i) {
            if (min_d2[i] > best_d2) {  // strict: lowest index wins ties
                best_d2 = min_d2[i];
                best = i;
            }
        }
        selected.push_back(best);
        for (int i = 0; i < n; ++i) {
            double d2 = (points[i] - points[best]).squared_norm();
            if (d2 < min_d2[i]) min_d2[i] = d2;
        }
    }
    return selected;
}

// ---------------------------------------------------------------------------
// Homography

namespace {

struct NormXform {
    double cx, cy, s;  // p' = s * (p - c)
};

NormXform hartley_normalize(const std::vector<Vec2>& pts) {
    double cx = 0, cy = 0;
    for (const auto& p : pts) { cx += p.x; cy += p.y; }
    cx /= pts.size();
    cy /= pts.size();
    double mean_d = 0;
    for (const auto& p : pts)
        mean_d += std::hypot(p.x - cx, p.y - cy);
    mean_d /= pts.size();
    double s = mean_d > 1e-12 ? std::sqrt(2.0) / mean_d : 1.0;
    return {cx, cy, s};
}

}  // namespace

Mat3 svd_least_squares_homography(const std::vector<Vec2>& src,
                                  const std::vector<Vec2>& dst) {
    size_t n = src.size();
    if (n != dst.size()) throw ShapeError("homography: point count mismatch");
    if (n < 4) throw DegenerateConfiguration("homography: need >= 4 correspondences");

    NormXform ns = hartley_normalize(src);
    NormXform nd = hartley_normalize(dst);

    Eigen::MatrixXd A(2 * n, 9);
    for (size_t i = 0; i < n; ++i) {
        double x = ns.s * (src[i].x - ns.cx), y = ns.s * (src[i].y - ns.cy);
        double u = nd.s * (dst[i].x - nd.cx), v = nd.s * (dst[i].y - nd.cy);
        A.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
        A.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // A rank-deficient design matrix (e.g. collinear points) leaves more than
    // one dimension in the nullspace.
    if (sv(7) <= 1e-10 * sv(0))
        throw DegenerateConfiguration("homography: rank-deficient design matrix");

    Eigen::VectorXd h = svd.matrixV().col(8);
    Mat3 Hn;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) Hn(r, c) = h(3 * r + c);

    // Undo normalization: H = T_dst^-1 * Hn * T_src.
    Mat3 Ts{{{ns.s, 0, -ns.s * ns.cx}, {0, ns.s, -ns.s * ns.cy}, {0, 0, 1}}};
    Mat3 Td_inv{{{1.0 / nd.s, 0, nd.cx}, {0, 1.0 / nd.s, nd.cy}, {0, 0, 1}}};
    Mat3 H = Td_inv * Hn * Ts;

    double fro = 0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) fro += H(r, c) * H(r, c);
    fro = std::sqrt(fro);
    if (std::abs(H(2, 2)) > 1e-8 * fro) {
        double inv = 1.0 / H(2, 2);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) H(r, c) *= inv;
    } else {
        double inv = 1.0 / fro;
        // Fix the overall sign by the largest-magnitude entry.
        double lead = 0;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                if (std::abs(H(r, c)) > std::abs(lead)) lead = H(r, c);
        if (lead < 0) inv = -inv;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) H(r, c) *= inv;
    }
    return H;
}

// ---------------------------------------------------------------------------
// Bilinear sampling

BilinearFootprint bilinear_footprint(int h, int w, const Vec2& xy) {
    double cx = std::clamp(xy.x, 0.0, static_cast<double>(w - 1));
    double cy = std::clamp(xy.y, 0.0, static_cast<double>(h - 1));
    int x0 = static_cast<int>(std::floor(cx));
    int y0 = static_cast<int>(std::floor(cy));
    int x1 = std::min(x0 + 1, w - 1);
    int y1 = std::min(y0 + 1, h - 1);
    return {x0, y0, x1, y1, cx - x0, cy - y0};
}

void bilinear_sample(const double* tex, int h, int w, int channels,
                     const Vec2& xy, double* out) {
    BilinearFootprint f = bilinear_footprint(h, w, xy);
    double w00 = (1 - f.fx) * (1 - f.fy), w10 = f.fx * (1 - f.fy);
    double w01 = (1 - f.fx) * f.fy, w11 = f.fx * f.fy;
    const double* t00 = tex + (f.y0 * w + f.x0) * channels;
    const double* t10 = tex + (f.y0 * w + f.x1) * channels;
    const double* t01 = tex + (f.y1 * w + f.x0) * channels;
    const double* t11 = tex + (f.y1 * w + f.x1) * channels;
    for (int c = 0; c < channels; ++c)
        out[c] = w00 * t00[c] + w10 * t10[c] + w01 * t01[c] + w11 * t11[c];
}

Vec2 bilinear_sample_backward(const double* tex, int h, int w, int channels,
                              const Vec2& xy, const double* d_out,
                              double* d_tex) {
    BilinearFootprint f = bilinear_footprint(h, w, xy);
    double w00 = (1 - f.fx) * (1 - f.fy), w10 = f.fx * (1 - f.fy);
    double w01 = (1 - f.fx) * f.fy, w11 = f.fx * f.fy;
    size_t i00 = (static_cast<size_t>(f.y0) * w + f.x0) * channels;
    size_t i10 = (static_cast<size_t>(f.y0) * w + f.x1) * channels;
    size_t i01 = (static_cast<size_t>(f.y1) * w + f.x0) * channels;
    size_t i11 = (static_cast<size_t>(f.y1) * w + f.x1) * channels;

    double dx = 0, dy = 0;
    for (int c = 0; c < channels; ++c) {
        double g = d_out[c];
        if (d_tex) {
            d_tex[i00 + c] += w00 * g;
            d_tex[i10 + c] += w10 * g;
            d_tex[i01 + c] += w01 * g;
            d_tex[i11 + c] += w11 * g;
        }
        double t00 = tex[i00 + c], t10 = tex[i10 + c];
        double t01 = tex[i01 + c], t11 = tex[i11 + c];
        dx += g * ((t10 - t00) * (1 - f.fy) + (t11 - t01) * f.fy);
        dy += g * ((t01 - t00) * (1 - f.fx) + (t11 - t10) * f.fx);
    }
    // Clamp-to-edge kills the positional gradient outside the texture.
    if (xy.x < 0 || xy.x > w - 1) dx = 0;
    if (xy.y < 0 || xy.y > h - 1) dy = 0;
    return {dx, dy};
}

}  // namespace ghs
