#include "ghs/gaussmodel.hpp"

#include <cmath>

namespace ghs {

Gaussian3D GaussianSet::get(int i) const {
    Gaussian3D g;
    g.mu = mu[i];
    g.scale = scale[i];
    g.quat = quat[i];
    g.opacity = opacity[i];
    g.sh.assign(sh.begin() + static_cast<size_t>(i) * sh_stride(),
                sh.begin() + static_cast<size_t>(i + 1) * sh_stride());
    return g;
}

void GaussianSet::push_back(const Gaussian3D& g) {
    mu.push_back(g.mu);
    scale.push_back(g.scale);
    quat.push_back(g.quat);
    opacity.push_back(g.opacity);
    sh.insert(sh.end(), g.sh.begin(), g.sh.end());
}

Mat3 build_covariance(const Vec3& scale, const Quat& quat) {
    if (!(scale.x > 0 && scale.y > 0 && scale.z > 0))
        throw InvalidArgument("build_covariance: scale must be positive");
    Mat3 R = quat_to_rot(quat);
    Mat3 D = Mat3::diag(scale.x * scale.x, scale.y * scale.y, scale.z * scale.z);
    return R * D * R.transpose();
}

void build_covariance_backward(const Vec3& scale, const Quat& quat,
                               const Mat3& d_cov, Vec3& d_scale, Quat& d_quat) {
    Mat3 R = quat_to_rot(quat);
    Mat3 D = Mat3::diag(scale.x * scale.x, scale.y * scale.y, scale.z * scale.z);
    // Sigma = R D R^T;  dL/dR = (dC + dC^T) R D,  dL/dD = R^T dC R.
    Mat3 sym = d_cov + d_cov.transpose();
    Mat3 dR = sym * R * D;
    Mat3 dD = R.transpose() * d_cov * R;
    d_scale = {2 * scale.x * dD(0, 0), 2 * scale.y * dD(1, 1),
               2 * scale.z * dD(2, 2)};
    d_quat = quat_to_rot_backward(quat, dR);
}

std::optional<ProjectedGaussian> project_gaussian(const Vec3& mu_cam,
                                                  const Mat3& cov_cam,
                                                  const Camera& cam,
                                                  double near) {
    double z = mu_cam.z;
    if (z <= near) return std::nullopt;

    ProjectedGaussian out;
    out.mu2d = {cam.fx * mu_cam.x / z + cam.cx, cam.fy * mu_cam.y / z + cam.cy};
    out.depth = z;

    double j00 = cam.fx / z, j02 = -cam.fx * mu_cam.x / (z * z);
    double j11 = cam.fy / z, j12 = -cam.fy * mu_cam.y / (z * z);
    // cov2d = J Sigma J^T with J = [[j00, 0, j02], [0, j11, j12]].
    const Mat3& S = cov_cam;
    Vec3 r0{j00 * S(0, 0) + j02 * S(2, 0), j00 * S(0, 1) + j02 * S(2, 1),
            j00 * S(0, 2) + j02 * S(2, 2)};
    Vec3 r1{j11 * S(1, 0) + j12 * S(2, 0), j11 * S(1, 1) + j12 * S(2, 1),
            j11 * S(1, 2) + j12 * S(2, 2)};
    out.cov2d(0, 0) = r0.x * j00 + r0.z * j02 + kCovDilation;
    out.cov2d(0, 1) = r0.y * j11 + r0.z * j12;
    out.cov2d(1, 0) = r1.x * j00 + r1.z * j02;
    out.cov2d(1, 1) = r1.y * j11 + r1.z * j12 + kCovDilation;
    return out;
}

std::optional<Splat2D> project_gaussian(const Gaussian3D& g_cam,
                                        const Camera& cam, double near) {
    Mat3 cov = build_covariance(g_cam.scale, g_cam.quat);
    auto p = project_gaussian(g_cam.mu, cov, cam, near);
    if (!p) return std::nullopt;
    Splat2D s;
    s.mu2d = p->mu2d;
    s.cov2d = p->cov2d;
    s.depth = p->depth;
    s.opacity = g_cam.opacity;
    s.rgb = sh_to_rgb(g_cam.sh, g_cam.mu.normalized());
    return s;
}

void project_gaussian_backward(const Vec3& mu_cam, const Mat3& cov_cam,
                               const Camera& cam, const Vec2& d_mu2d,
                               const Mat2& d_cov2d, Vec3& d_mu_cam,
                               Mat3& d_cov_cam) {
    double z = mu_cam.z, z2 = z * z, z3 = z2 * z;
    double j00 = cam.fx / z, j02 = -cam.fx * mu_cam.x / z2;
    double j11 = cam.fy / z, j12 = -cam.fy * mu_cam.y / z2;

    // Mean projection path.
    d_mu_cam.x += d_mu2d.x * j00;
    d_mu_cam.y += d_mu2d.y * j11;
    d_mu_cam.z += d_mu2d.x * (-cam.fx * mu_cam.x / z2) +
                  d_mu2d.y * (-cam.fy * mu_cam.y / z2);

    // d(cov_cam) = J^T dC J.
    double J[2][3] = {{j00, 0, j02}, {0, j11, j12}};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            double s = 0;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) s += J[i][a] * d_cov2d(i, j) * J[j][b];
            d_cov_cam(a, b) += s;
        }

    // J depends on the mean: dL/dJ = (dC + dC^T) J Sigma.
    Mat2 sym = d_cov2d + d_cov2d.transpose();
    double dJ[2][3] = {{0, 0, 0}, {0, 0, 0}};
    for (int i = 0; i < 2; ++i)
        for (int a = 0; a < 3; ++a) {
            double s = 0;
            for (int j = 0; j < 2; ++j)
                for (int b = 0; b < 3; ++b)
                    s += sym(i, j) * J[j][b] * cov_cam(b, a);
            dJ[i][a] = s;
        }
    d_mu_cam.x += dJ[0][2] * (-cam.fx / z2);
    d_mu_cam.y += dJ[1][2] * (-cam.fy / z2);
    d_mu_cam.z += dJ[0][0] * (-cam.fx / z2) + dJ[0][2] * (2 * cam.fx * mu_cam.x / z3) +
                  dJ[1][1] * (-cam.fy / z2) + dJ[1][2] * (2 * cam.fy * mu_cam.y / z3);
}

}  // namespace ghs
