#pragma once

// Gaussian parameterization, covariance construction and 3D -> 2D EWA splat
// projection, plus the matching backward passes.

#include <optional>
#include <vector>

#include "ghs/coremath.hpp"
#include "ghs/vecmath.hpp"

namespace ghs {

// Diagonal added to every projected covariance (screen-space low-pass).
inline constexpr double kCovDilation = 0.3;
inline constexpr double kDefaultNear = 0.01;

struct Gaussian3D {
    Vec3 mu;
    Vec3 scale;          // per-axis std, > 0
    Quat quat;
    double opacity = 0;  // post-activation, in [0,1]
    std::vector<double> sh;  // 3 * (degree+1)^2, layout sh[basis*3 + channel]
};

// Structure-of-arrays set of head Gaussians.
struct GaussianSet {
    std::vector<Vec3> mu;
    std::vector<Vec3> scale;
    std::vector<Quat> quat;
    std::vector<double> opacity;
    std::vector<double> sh;  // flattened, sh_stride() doubles per Gaussian
    int sh_bases = 16;       // (degree+1)^2 per channel

    int size() const { return static_cast<int>(mu.size()); }
    int sh_stride() const { return 3 * sh_bases; }
    Gaussian3D get(int i) const;
    void push_back(const Gaussian3D& g);
};

struct Camera {
    Mat3 world_to_cam_rot = Mat3::identity();
    Vec3 world_to_cam_t;
    double fx = 1, fy = 1;
    double cx = 0, cy = 0;
    int width = 0, height = 0;

    Vec3 to_camera(const Vec3& p_world) const {
        return world_to_cam_rot * p_world + world_to_cam_t;
    }
    // Camera center in world coordinates.
    Vec3 position() const {
        return world_to_cam_rot.transpose() * (-1.0 * world_to_cam_t);
    }
    Vec2 project(const Vec3& p_cam) const {
        return {fx * p_cam.x / p_cam.z + cx, fy * p_cam.y / p_cam.z + cy};
    }
    bool in_image(const Vec2& px) const {
        return px.x >= 0 && px.x <= width - 1 && px.y >= 0 && px.y <= height - 1;
    }
};

struct Splat2D {
    Vec2 mu2d;
    Mat2 cov2d;     // after low-pass dilation
    double depth = 0;
    Vec3 rgb;
    double opacity = 0;
};

// Sigma = R S S^T R^T. Throws InvalidArgument on non-positive scale.
Mat3 build_covariance(const Vec3& scale, const Quat& quat);
void build_covariance_backward(const Vec3& scale, const Quat& quat,
                               const Mat3& d_cov, Vec3& d_scale, Quat& d_quat);

struct ProjectedGaussian {
    Vec2 mu2d;
    Mat2 cov2d;
    double depth;
};

// Perspective projection of a camera-space Gaussian. Returns nullopt when the
// mean is behind the near plane (culled, not fatal).
std::optional<ProjectedGaussian> project_gaussian(const Vec3& mu_cam,
                                                  const Mat3& cov_cam,
                                                  const Camera& cam,
                                                  double near = kDefaultNear);

// Spec-shaped convenience wrapper for a full camera-space Gaussian.
std::optional<Splat2D> project_gaussian(const Gaussian3D& g_cam,
                                        const Camera& cam,
                                        double near = kDefaultNear);

// Backward through mean projection and cov2d = J Sigma J^T (including the
// dependence of J on the mean).
void project_gaussian_backward(const Vec3& mu_cam, const Mat3& cov_cam,
                               const Camera& cam, const Vec2& d_mu2d,
                               const Mat2& d_cov2d, Vec3& d_mu_cam,
                               Mat3& d_cov_cam);

}  // namespace ghs
