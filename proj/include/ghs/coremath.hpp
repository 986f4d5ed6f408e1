#pragma once

// Deterministic numeric kernels shared by all modules: quaternion algebra,
// positional encoding, spherical harmonics, farthest point sampling,
// DLT homography, bilinear texture sampling. Forward ops come with the
// hand-derived backward passes used by the trainer.

#include <cstdint>
#include <vector>

#include "ghs/errors.hpp"
#include "ghs/vecmath.hpp"

namespace ghs {

// ---------------------------------------------------------------------------
// Quaternions

// Rotation matrix from a (not necessarily unit) quaternion. Normalizes
// internally; throws InvalidQuaternion on zero norm.
Mat3 quat_to_rot(const Quat& q);

// d(loss)/dq given d(loss)/dR, including the normalization Jacobian.
Quat quat_to_rot_backward(const Quat& q, const Mat3& dR);

// Rodrigues: rotation about axis-angle vector (angle = |v|).
Mat3 axis_angle_to_rot(const Vec3& v);

// ---------------------------------------------------------------------------
// Positional encoding (NeRF-style, frequencies 2^k * pi, no raw passthrough
// unless include_input is set)

struct PosEnc {
    int num_frequencies = 0;
    bool include_input = false;

    int output_dim(int input_dim) const {
        return input_dim * (2 * num_frequencies + (include_input ? 1 : 0));
    }
    // Appends the encoding of x to out.
    void encode(const std::vector<double>& x, std::vector<double>& out) const;
    std::vector<double> encode(const std::vector<double>& x) const;
    // Jacobian d(enc)/d(x_i) for a single input element; appends the
    // derivative of each output slot of element i in encoding order.
    void encode_grad(double xi, std::vector<double>& dout) const;
};

// ---------------------------------------------------------------------------
// Spherical harmonics (real SH, degrees 0..3, 3DGS channel layout:
// sh[3 * b + ch], b = basis index)

int sh_degree_from_coeff_count(int n_coeffs_per_channel);

// Basis values for a unit direction; n = (degree+1)^2 entries.
void sh_basis(const Vec3& dir, int degree, double* basis);
// d(basis_b)/d(dir) for each basis entry.
void sh_basis_grad(const Vec3& dir, int degree, Vec3* grad);

// RGB = clamp(0.5 + sum_b sh_b * basis_b(dir), >= 0). sh.size() must be a
// multiple of 3 with a square count per channel, else ShapeError.
Vec3 sh_to_rgb(const std::vector<double>& sh, const Vec3& dir);

// Backward of sh_to_rgb through the clamp: fills d_sh (same size as sh) and
// returns d(loss)/d(dir) for a unit `dir` input (not through normalization).
Vec3 sh_to_rgb_backward(const std::vector<double>& sh, const Vec3& dir,
                        const Vec3& d_rgb, std::vector<double>& d_sh);

// ---------------------------------------------------------------------------
// Farthest point sampling

// Deterministic FPS; ties broken by lowest index. k > n throws
// InvalidArgument. seed_index selects the first point.
std::vector<int> farthest_point_sample(const std::vector<Vec3>& points, int k,
                                       int seed_index = 0);

// ---------------------------------------------------------------------------
// Homography (DLT with Hartley normalization)

// Least-squares homography mapping src -> dst (up to scale). Needs >= 4
// non-degenerate correspondences, else DegenerateConfiguration.
// Result has h33 = 1 when well-scaled, otherwise unit Frobenius norm.
Mat3 svd_least_squares_homography(const std::vector<Vec2>& src,
                                  const std::vector<Vec2>& dst);

inline Vec2 apply_homography(const Mat3& H, const Vec2& p) {
    double w = H(2, 0) * p.x + H(2, 1) * p.y + H(2, 2);
    return {(H(0, 0) * p.x + H(0, 1) * p.y + H(0, 2)) / w,
            (H(1, 0) * p.x + H(1, 1) * p.y + H(1, 2)) / w};
}

// ---------------------------------------------------------------------------
// Bilinear sampling (clamp-to-edge, texel centers at integer coordinates)

struct BilinearFootprint {
    int x0, y0, x1, y1;
    double fx, fy;  // fractional position inside the cell
};

BilinearFootprint bilinear_footprint(int h, int w, const Vec2& xy);

// out[c] = bilinear blend of the 4 enclosing texels. tex is row-major
// h*w*channels, channel-last.
void bilinear_sample(const double* tex, int h, int w, int channels,
                     const Vec2& xy, double* out);

// Scatter d(loss)/d(out) into d_tex (same layout as tex) and return
// d(loss)/d(xy). Outside the texture the spatial gradient is zero
// (clamp-to-edge).
Vec2 bilinear_sample_backward(const double* tex, int h, int w, int channels,
                              const Vec2& xy, const double* d_out,
                              double* d_tex);

}  // namespace ghs
