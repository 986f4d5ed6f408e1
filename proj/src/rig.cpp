#include "ghs/rig.hpp"

#include <cmath>
#include <limits>

#include "ghs/asset.hpp"

namespace ghs {

// ---------------------------------------------------------------------------
// DeformNet

DeformNet DeformNet::make(const Rig& rig, std::mt19937& rng, int width,
                          int n_hidden) {
    DeformNet d;
    d.n_expr = rig.n_expr;
    d.n_pose = rig.n_pose;
    d.n_joints = rig.n_joints;
    d.net = Mlp::make(3, width, n_hidden, d.output_dim(), rng);
    return d;
}

DeformOutputs deform_net_eval(const DeformNet& net, const Eigen::MatrixXd& mu,
                              DeformNetCache* cache) {
    Eigen::MatrixXd Y = net.net.forward(mu, cache ? &cache->mlp : nullptr);
    int ne3 = net.n_expr * 3, np27 = net.n_pose * 27, nj = net.n_joints;

    DeformOutputs out;
    out.expr = Y.leftCols(ne3);
    out.pose = Y.middleCols(ne3, np27);
    // Softmax over bone logits; zero logits give uniform weights.
    Eigen::MatrixXd logits = Y.rightCols(nj);
    Eigen::VectorXd rowmax = logits.rowwise().maxCoeff();
    Eigen::MatrixXd e = (logits.colwise() - rowmax).array().exp();
    out.lbs_w = e.array().colwise() / e.rowwise().sum().array();
    if (cache) cache->out = out;
    return out;
}

DeformOutputs deform_net_eval(const DeformNet& net, const Vec3& mu) {
    Eigen::MatrixXd X(1, 3);
    X << mu.x, mu.y, mu.z;
    return deform_net_eval(net, X);
}

Eigen::MatrixXd deform_net_backward(const DeformNet& net,
                                    const DeformNetCache& cache,
                                    const RowMatrixXd& d_expr,
                                    const RowMatrixXd& d_pose,
                                    const RowMatrixXd& d_lbs_w,
                                    MlpGrads& grads, bool need_dx) {
    int B = static_cast<int>(d_expr.rows());
    int ne3 = net.n_expr * 3, np27 = net.n_pose * 27, nj = net.n_joints;
    Eigen::MatrixXd dY(B, ne3 + np27 + nj);
    dY.leftCols(ne3) = d_expr;
    dY.middleCols(ne3, np27) = d_pose;
    // Softmax backward: dlogit = w .* (dw - sum(w .* dw)).
    const RowMatrixXd& w = cache.out.lbs_w;
    Eigen::VectorXd dot = (w.array() * d_lbs_w.array()).rowwise().sum();
    dY.rightCols(nj) =
        (w.array() * (d_lbs_w.array().colwise() - dot.array())).matrix();
    return net.net.backward(cache.mlp, dY, grads, need_dx);
}

// ---------------------------------------------------------------------------
// Skinning

static std::vector<Vec3> joint_positions(const Rig& rig,
                                         const std::vector<double>& psi) {
    std::vector<Vec3> joints = rig.rest_joints;
    if (rig.joint_regressor.size() > 0 && !psi.empty()) {
        Eigen::VectorXd p(psi.size());
        for (size_t i = 0; i < psi.size(); ++i) p(i) = psi[i];
        Eigen::VectorXd off = rig.joint_regressor * p;
        for (int j = 0; j < rig.n_joints; ++j)
            joints[j] += Vec3{off(3 * j), off(3 * j + 1), off(3 * j + 2)};
    }
    return joints;
}

SkinningFrame compute_skinning(const Rig& rig, const FrameParams& frame) {
    SkinningFrame sk;
    std::vector<Vec3> joints = joint_positions(rig, frame.psi);

    std::vector<Transform> G(rig.n_joints);
    G[0] = {Mat3::identity(), joints[0]};
    for (int j = 1; j < rig.n_joints; ++j) {
        Transform local{axis_angle_to_rot(frame.theta[j]),
                        joints[j] - joints[rig.parents[j]]};
        G[j] = G[rig.parents[j]] * local;
    }

    sk.bone.resize(rig.n_joints);
    sk.bone[0] = Transform::identity();  // static bone
    for (int j = 1; j < rig.n_joints; ++j) {
        // A_j = G_j * [I, joints_j]^-1 (rest uses the same psi-posed joints).
        sk.bone[j] = {G[j].R, G[j].t - G[j].R * joints[j]};
    }

    sk.pose_feat.resize(rig.pose_feature_dim());
    for (int p = 0; p < rig.n_pose; ++p) {
        Mat3 R = axis_angle_to_rot(frame.theta[p + 1]);
        Mat3 D = R - Mat3::identity();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) sk.pose_feat[p * 9 + r * 3 + c] = D(r, c);
    }

    sk.joints_posed.resize(rig.n_joints);
    for (int j = 0; j < rig.n_joints; ++j) sk.joints_posed[j] = G[j].t;
    return sk;
}

static Vec3 blendshape_offset(const Rig& rig, const std::vector<double>& psi,
                              const SkinningFrame& sk, const double* expr,
                              const double* pose) {
    Vec3 off{0, 0, 0};
    for (int e = 0; e < rig.n_expr; ++e)
        off += Vec3{expr[e * 3], expr[e * 3 + 1], expr[e * 3 + 2]} * psi[e];
    for (int k = 0; k < rig.pose_feature_dim(); ++k)
        off += Vec3{pose[k * 3], pose[k * 3 + 1], pose[k * 3 + 2]} * sk.pose_feat[k];
    return off;
}

LbsResult lbs_transform(const Rig& rig, const std::vector<double>& psi,
                        const SkinningFrame& sk, const Vec3& mu,
                        const double* expr, const double* pose,
                        const double* lbs_w) {
    (void)mu;
    Vec3 off = blendshape_offset(rig, psi, sk, expr, pose);
    Transform M{Mat3::zero(), Vec3{0, 0, 0}};
    for (int b = 0; b < rig.n_joints; ++b) M = M + sk.bone[b].scaled(lbs_w[b]);
    LbsResult r;
    r.offset = off;
    r.R = M.R;
    r.T = M.R * off + M.t;
    return r;
}

void lbs_transform_backward(const Rig& rig, const std::vector<double>& psi,
                            const SkinningFrame& sk, const Vec3& mu,
                            const double* lbs_w, const LbsResult& fwd,
                            const Vec3& d_mu_d, const Mat3& d_R, Vec3& d_mu,
                            double* d_expr, double* d_pose, double* d_lbs_w) {
    (void)lbs_w;
    // mu_d = M.R * (mu + off) + M.t; fwd.R == M.R.
    Vec3 mu_c = mu + fwd.offset;
    Mat3 dMR = Mat3::outer(d_mu_d, mu_c) + d_R;
    Vec3 dMt = d_mu_d;
    Vec3 d_off = fwd.R.transpose() * d_mu_d;
    d_mu += d_off;  // same chain as the offset

    for (int b = 0; b < rig.n_joints; ++b) {
        double g = dMt.dot(sk.bone[b].t);
        const Mat3& AR = sk.bone[b].R;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) g += dMR(r, c) * AR(r, c);
        d_lbs_w[b] += g;
    }
    for (int k = 0; k < rig.pose_feature_dim(); ++k) {
        double f = sk.pose_feat[k];
        d_pose[k * 3] += f * d_off.x;
        d_pose[k * 3 + 1] += f * d_off.y;
        d_pose[k * 3 + 2] += f * d_off.z;
    }
    for (int e = 0; e < rig.n_expr; ++e) {
        d_expr[e * 3] += psi[e] * d_off.x;
        d_expr[e * 3 + 1] += psi[e] * d_off.y;
        d_expr[e * 3 + 2] += psi[e] * d_off.z;
    }
}

DeformedGaussians deform_gaussians(const GaussianSet& set, const Rig& rig,
                                   const FrameParams& frame,
                                   const DeformNet& net) {
    int n = set.size();
    Eigen::MatrixXd mu(n, 3);
    for (int i = 0; i < n; ++i) mu.row(i) << set.mu[i].x, set.mu[i].y, set.mu[i].z;
    DeformOutputs out = deform_net_eval(net, mu);
    SkinningFrame sk = compute_skinning(rig, frame);

    DeformedGaussians d;
    d.mu.resize(n);
    d.lin.resize(n);
    for (int i = 0; i < n; ++i) {
        LbsResult r = lbs_transform(rig, frame.psi, sk, set.mu[i],
                                    out.expr.row(i).data(), out.pose.row(i).data(),
                                    out.lbs_w.row(i).data());
        d.mu[i] = r.R * set.mu[i] + r.T;
        d.lin[i] = r.R;
    }
    return d;
}

int pseudo_gt_lookup(const Rig& rig, const Vec3& mu) {
    if (rig.verts.empty()) throw InvalidAsset("pseudo_gt_lookup: empty reference mesh");
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (size_t v = 0; v < rig.verts.size(); ++v) {
        double d2 = (rig.verts[v] - mu).squared_norm();
        if (d2 < best_d2) {  // strict: lowest index wins ties
            best_d2 = d2;
            best = static_cast<int>(v);
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Toy rig

Rig make_toy_rig(unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    Rig rig;
    rig.n_joints = 4;  // static, neck, head, jaw
    rig.n_expr = 8;
    rig.n_pose = 3;
    rig.parents = {-1, 0, 1, 2};
    // y grows downward (image convention); camera looks along +z.
    rig.rest_joints = {{0, 0.55, 0}, {0, 0.30, 0}, {0, 0.12, 0}, {0, 0.05, 0.06}};

    rig.joint_regressor = Eigen::MatrixXd::Zero(3 * rig.n_joints, rig.n_expr);
    for (int j = 2; j < rig.n_joints; ++j)  // head/jaw drift slightly with psi
        for (int e = 0; e < rig.n_expr; ++e)
            for (int c = 0; c < 3; ++c)
                rig.joint_regressor(3 * j + c, e) = 0.004 * uni(rng);

    // Reference mesh: head sphere + neck column + shoulder plane.
    auto add_vert = [&](const Vec3& p, const std::array<double, 4>& w) {
        rig.verts.push_back(p);
        std::vector<double> lbs(w.begin(), w.end());
        double s = lbs[0] + lbs[1] + lbs[2] + lbs[3];
        for (auto& v : lbs) v /= s;
        rig.vert_lbs.push_back(lbs);
        std::vector<double> ve(rig.n_expr * 3, 0.0), vp(rig.n_pose * 27, 0.0);
        bool head_region = w[2] > 0.3 || w[3] > 0.3;
        if (head_region) {
            for (auto& v : ve) v = 0.01 * uni(rng);
            for (auto& v : vp) v = 0.002 * uni(rng);
        }
        rig.vert_expr.push_back(std::move(ve));
        rig.vert_pose.push_back(std::move(vp));
    };

    const double kHeadR = 0.17;
    for (int i = 0; i < 200; ++i) {
        double u = uni(rng), phi = M_PI * uni(rng);
        double r = std::sqrt(std::max(0.0, 1.0 - u * u));
        Vec3 p{kHeadR * r * std::cos(phi), kHeadR * u, kHeadR * r * std::sin(phi)};
        double jaw = (p.y > 0.08 && p.z > 0) ? 0.5 : 0.0;
        add_vert(p, {0, 0.1, 1.0 - jaw, jaw});
    }
    for (int i = 0; i < 40; ++i) {
        double t = i / 39.0;  // 0 = head base, 1 = shoulders
        Vec3 p{0.05 * uni(rng), 0.17 + 0.18 * t, 0.02 * uni(rng)};
        add_vert(p, {t, 1.0 - t, 0, 0});
    }
    for (int ix = 0; ix < 16; ++ix)
        for (int iy = 0; iy < 8; ++iy) {
            Vec3 p{-0.45 + 0.9 * ix / 15.0, 0.38 + 0.32 * iy / 7.0, 0.0};
            add_vert(p, {1, 0.02, 0, 0});
        }
    return rig;
}

// ---------------------------------------------------------------------------
// Rig asset IO

void save_rig(const std::string& path, const Rig& rig) {
    BlobFile bf;
    bf.manifest["kind"] = "rig";
    bf.manifest["n_joints"] = rig.n_joints;
    bf.manifest["n_expr"] = rig.n_expr;
    bf.manifest["n_pose"] = rig.n_pose;
    bf.manifest["n_verts"] = rig.verts.size();
    bf.manifest["parents"] = rig.parents;

    std::vector<double> rest;
    for (const auto& j : rig.rest_joints) { rest.push_back(j.x); rest.push_back(j.y); rest.push_back(j.z); }
    bf.blobs["rest_joints"] = to_f32(rest);

    std::vector<double> reg(rig.joint_regressor.size());
    for (int r = 0; r < rig.joint_regressor.rows(); ++r)
        for (int c = 0; c < rig.joint_regressor.cols(); ++c)
            reg[r * rig.joint_regressor.cols() + c] = rig.joint_regressor(r, c);
    bf.blobs["joint_regressor"] = to_f32(reg);

    std::vector<double> verts, ve, vp, vw;
    for (size_t i = 0; i < rig.verts.size(); ++i) {
        verts.push_back(rig.verts[i].x);
        verts.push_back(rig.verts[i].y);
        verts.push_back(rig.verts[i].z);
        ve.insert(ve.end(), rig.vert_expr[i].begin(), rig.vert_expr[i].end());
        vp.insert(vp.end(), rig.vert_pose[i].begin(), rig.vert_pose[i].end());
        vw.insert(vw.end(), rig.vert_lbs[i].begin(), rig.vert_lbs[i].end());
    }
    bf.blobs["verts"] = to_f32(verts);
    bf.blobs["vert_expr"] = to_f32(ve);
    bf.blobs["vert_pose"] = to_f32(vp);
    bf.blobs["vert_lbs"] = to_f32(vw);
    bf.save(path, "GRIG");
}

Rig load_rig(const std::string& path) {
    BlobFile bf = BlobFile::load(path, "GRIG");
    Rig rig;
    rig.n_joints = bf.manifest.at("n_joints");
    rig.n_expr = bf.manifest.at("n_expr");
    rig.n_pose = bf.manifest.at("n_pose");
    rig.parents = bf.manifest.at("parents").get<std::vector<int>>();

    auto rest = to_f64(bf.blobs.at("rest_joints"));
    for (int j = 0; j < rig.n_joints; ++j)
        rig.rest_joints.push_back({rest[3 * j], rest[3 * j + 1], rest[3 * j + 2]});

    auto reg = to_f64(bf.blobs.at("joint_regressor"));
    rig.joint_regressor = Eigen::MatrixXd(3 * rig.n_joints, rig.n_expr);
    for (int r = 0; r < rig.joint_regressor.rows(); ++r)
        for (int c = 0; c < rig.joint_regressor.cols(); ++c)
            rig.joint_regressor(r, c) = reg[r * rig.n_expr + c];

    size_t n_verts = bf.manifest.at("n_verts");
    auto verts = to_f64(bf.blobs.at("verts"));
    auto ve = to_f64(bf.blobs.at("vert_expr"));
    auto vp = to_f64(bf.blobs.at("vert_pose"));
    auto vw = to_f64(bf.blobs.at("vert_lbs"));
    int se = rig.n_expr * 3, sp = rig.n_pose * 27, sw = rig.n_joints;
    for (size_t i = 0; i < n_verts; ++i) {
        rig.verts.push_back({verts[3 * i], verts[3 * i + 1], verts[3 * i + 2]});
        rig.vert_expr.emplace_back(ve.begin() + i * se, ve.begin() + (i + 1) * se);
        rig.vert_pose.emplace_back(vp.begin() + i * sp, vp.begin() + (i + 1) * sp);
        rig.vert_lbs.emplace_back(vw.begin() + i * sw, vw.begin() + (i + 1) * sw);
    }
    return rig;
}

}  // namespace ghs
