#pragma once

// Skeletal rig with per-Gaussian learned blendshapes and LBS weights, plus
// the skinning transform. The rig is FLAME-shaped (joint regressor, pose and
// expression blendshapes, one static bone) but the asset format accepts any
// rig of this shape.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ghs/gaussmodel.hpp"
#include "ghs/mlp.hpp"
#include "ghs/vecmath.hpp"

namespace ghs {

struct Rig {
    int n_joints = 0;       // includes the static bone at index 0
    int n_expr = 0;
    int n_pose = 0;         // pose-blendshape drivers, n_joints - 1
    std::vector<int> parents;        // parents[0] == -1
    std::vector<Vec3> rest_joints;
    // joints(psi) = rest + reshape(regressor * psi); (3*n_joints) x n_expr.
    Eigen::MatrixXd joint_regressor;

    // Reference mesh for pseudo ground truth.
    std::vector<Vec3> verts;
    std::vector<std::vector<double>> vert_expr;   // per vertex, n_expr * 3
    std::vector<std::vector<double>> vert_pose;   // per vertex, n_pose * 9 * 3
    std::vector<std::vector<double>> vert_lbs;    // per vertex, n_joints

    int pose_feature_dim() const { return n_pose * 9; }
};

struct FrameParams {
    int index = 0;
    double timestamp = 0;
    std::vector<Vec3> theta;   // per-joint axis-angle; theta[0] is ignored
    std::vector<double> psi;   // expression coefficients
    Camera cam;
    std::vector<Vec2> ldmk;    // nose (optional), neck, L shoulder, R shoulder
    bool has_nose = true;
    std::string image_path;
    std::string head_mask_path;
};

// MLP_d with heads for expression blendshapes E (n_e x 3), pose blendshapes
// P (n_p x 9 x 3) and LBS weights W (softmax over n_j bones).
struct DeformNet {
    Mlp net;
    int n_expr = 0, n_pose = 0, n_joints = 0;

    static DeformNet make(const Rig& rig, std::mt19937& rng, int width = 128,
                          int n_hidden = 4);
    int output_dim() const { return n_expr * 3 + n_pose * 27 + n_joints; }
};

// Per-Gaussian MLP_d outputs (post-activation).
struct DeformOutputs {
    RowMatrixXd expr;     // B x (n_e * 3)
    RowMatrixXd pose;     // B x (n_p * 27)
    RowMatrixXd lbs_w;    // B x n_j, rows on the simplex
};

struct DeformNetCache {
    Mlp::Cache mlp;
    DeformOutputs out;
};

// Batched forward over rows of `mu`.
DeformOutputs deform_net_eval(const DeformNet& net, const Eigen::MatrixXd& mu,
                              DeformNetCache* cache = nullptr);
// Single-point convenience (row vectors).
DeformOutputs deform_net_eval(const DeformNet& net, const Vec3& mu);

// Backward through softmax and the MLP; accumulates into grads, returns
// d(loss)/d(mu) rows if need_dx.
Eigen::MatrixXd deform_net_backward(const DeformNet& net,
                                    const DeformNetCache& cache,
                                    const RowMatrixXd& d_expr,
                                    const RowMatrixXd& d_pose,
                                    const RowMatrixXd& d_lbs_w,
                                    MlpGrads& grads, bool need_dx = false);

// Frame-constant skinning data: per-bone rest-relative transforms and the
// pose blendshape driver features vec(R_j - I).
struct SkinningFrame {
    std::vector<Transform> bone;     // A_b; bone[0] is identity (static bone)
    std::vector<double> pose_feat;   // n_pose * 9
    std::vector<Vec3> joints_posed;  // world joint positions under psi/theta
};

SkinningFrame compute_skinning(const Rig& rig, const FrameParams& frame);

// Blended bone transform with blendshape offsets folded into T:
// mu_d = R * mu + T.
struct LbsResult {
    Mat3 R;
    Vec3 T;
    Vec3 offset;  // B_P + B_E, cached for the backward pass
};

LbsResult lbs_transform(const Rig& rig, const std::vector<double>& psi,
                        const SkinningFrame& sk, const Vec3& mu,
                        const double* expr, const double* pose,
                        const double* lbs_w);

// Backward: given d(loss)/d(mu_d) and d(loss)/d(R_blend) (the blended linear
// map used for covariance), accumulate gradients for mu, E, P and the
// post-softmax weights.
void lbs_transform_backward(const Rig& rig, const std::vector<double>& psi,
                            const SkinningFrame& sk, const Vec3& mu,
                            const double* lbs_w, const LbsResult& fwd,
                            const Vec3& d_mu_d, const Mat3& d_R, Vec3& d_mu,
                            double* d_expr, double* d_pose, double* d_lbs_w);

// World-space deformed means and linear maps (Sigma_d = lin * Sigma * lin^T).
struct DeformedGaussians {
    std::vector<Vec3> mu;
    std::vector<Mat3> lin;
};

DeformedGaussians deform_gaussians(const GaussianSet& set, const Rig& rig,
                                   const FrameParams& frame,
                                   const DeformNet& net);

// Index of the Euclidean-nearest reference vertex (ties: lowest index).
// Throws InvalidAsset on an empty mesh.
int pseudo_gt_lookup(const Rig& rig, const Vec3& mu);

// Procedural toy rig: static bone + neck + head + jaw, smooth reference mesh.
Rig make_toy_rig(unsigned seed);

void save_rig(const std::string& path, const Rig& rig);
Rig load_rig(const std::string& path);

}  // namespace ghs
