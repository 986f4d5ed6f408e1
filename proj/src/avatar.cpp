#include "ghs/avatar.hpp"

#include <filesystem>

#include "ghs/asset.hpp"

namespace ghs {

namespace {

void mlp_to_blobs(BlobFile& bf, const std::string& prefix, const Mlp& mlp) {
    nlohmann::json shapes = nlohmann::json::array();
    for (int l = 0; l < mlp.n_layers(); ++l) {
        const auto& W = mlp.W[l];
        shapes.push_back({W.rows(), W.cols()});
        std::vector<double> w(W.size()), b(mlp.b[l].size());
        for (int r = 0; r < W.rows(); ++r)
            for (int c = 0; c < W.cols(); ++c) w[r * W.cols() + c] = W(r, c);
        for (int i = 0; i < mlp.b[l].size(); ++i) b[i] = mlp.b[l](i);
        bf.blobs[prefix + "_W" + std::to_string(l)] = to_f32(w);
        bf.blobs[prefix + "_b" + std::to_string(l)] = to_f32(b);
    }
    bf.manifest[prefix + "_shapes"] = shapes;
}

Mlp mlp_from_blobs(const BlobFile& bf, const std::string& prefix) {
    Mlp mlp;
    const auto& shapes = bf.manifest.at(prefix + "_shapes");
    for (size_t l = 0; l < shapes.size(); ++l) {
        int rows = shapes[l][0], cols = shapes[l][1];
        auto w = to_f64(bf.blobs.at(prefix + "_W" + std::to_string(l)));
        auto b = to_f64(bf.blobs.at(prefix + "_b" + std::to_string(l)));
        if (static_cast<int>(w.size()) != rows * cols ||
            static_cast<int>(b.size()) != rows)
            throw CorruptAsset("avatar: blob size mismatch in " + prefix);
        Eigen::MatrixXd W(rows, cols);
        Eigen::VectorXd bv(rows);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) W(r, c) = w[r * cols + c];
        for (int r = 0; r < rows; ++r) bv(r) = b[r];
        mlp.W.push_back(std::move(W));
        mlp.b.push_back(std::move(bv));
    }
    return mlp;
}

}  // namespace

void save_avatar(const std::string& path, const AvatarModel& m) {
    BlobFile bf;
    bf.manifest["kind"] = "avatar";

    // Rig (same layout as the standalone .rig asset).
    bf.manifest["n_joints"] = m.rig.n_joints;
    bf.manifest["n_expr"] = m.rig.n_expr;
    bf.manifest["n_pose"] = m.rig.n_pose;
    bf.manifest["n_verts"] = m.rig.verts.size();
    bf.manifest["parents"] = m.rig.parents;
    std::vector<double> tmp;
    for (const auto& j : m.rig.rest_joints)
        tmp.insert(tmp.end(), {j.x, j.y, j.z});
    bf.blobs["rig_rest_joints"] = to_f32(tmp);
    tmp.clear();
    for (int r = 0; r < m.rig.joint_regressor.rows(); ++r)
        for (int c = 0; c < m.rig.joint_regressor.cols(); ++c)
            tmp.push_back(m.rig.joint_regressor(r, c));
    bf.blobs["rig_joint_regressor"] = to_f32(tmp);
    tmp.clear();
    std::vector<double> ve, vp, vw;
    for (size_t i = 0; i < m.rig.verts.size(); ++i) {
        tmp.insert(tmp.end(),
                   {m.rig.verts[i].x, m.rig.verts[i].y, m.rig.verts[i].z});
        ve.insert(ve.end(), m.rig.vert_expr[i].begin(), m.rig.vert_expr[i].end());
        vp.insert(vp.end(), m.rig.vert_pose[i].begin(), m.rig.vert_pose[i].end());
        vw.insert(vw.end(), m.rig.vert_lbs[i].begin(), m.rig.vert_lbs[i].end());
    }
    bf.blobs["rig_verts"] = to_f32(tmp);
    bf.blobs["rig_vert_expr"] = to_f32(ve);
    bf.blobs["rig_vert_pose"] = to_f32(vp);
    bf.blobs["rig_vert_lbs"] = to_f32(vw);

    // Gaussians.
    bf.manifest["n_gaussians"] = m.gaussians.size();
    bf.manifest["sh_bases"] = m.gaussians.sh_bases;
    tmp.clear();
    for (const auto& v : m.gaussians.mu) tmp.insert(tmp.end(), {v.x, v.y, v.z});
    bf.blobs["g_mu"] = to_f32(tmp);
    tmp.clear();
    for (const auto& v : m.gaussians.scale)
        tmp.insert(tmp.end(), {v.x, v.y, v.z});
    bf.blobs["g_scale"] = to_f32(tmp);
    tmp.clear();
    for (const auto& q : m.gaussians.quat)
        tmp.insert(tmp.end(), {q.w, q.x, q.y, q.z});
    bf.blobs["g_quat"] = to_f32(tmp);
    bf.blobs["g_opacity"] = to_f32(m.gaussians.opacity);
    bf.blobs["g_sh"] = to_f32(m.gaussians.sh);

    // Anchors.
    bf.manifest["n_anchors"] = m.anchors.size();
    tmp.clear();
    for (const auto& v : m.anchors.mu) tmp.insert(tmp.end(), {v.x, v.y, v.z});
    bf.blobs["a_mu"] = to_f32(tmp);
    bf.blobs["a_scale"] = to_f32(m.anchors.scale);
    tmp.clear();
    for (const auto& v : m.anchors.rgb) tmp.insert(tmp.end(), {v.x, v.y, v.z});
    bf.blobs["a_rgb"] = to_f32(tmp);
    bf.blobs["a_opacity"] = to_f32(m.anchors.opacity);
    tmp.clear();
    for (const auto& v : m.anchors.target_uv) tmp.insert(tmp.end(), {v.x, v.y});
    bf.blobs["a_target_uv"] = to_f32(tmp);

    // Networks and textures.
    mlp_to_blobs(bf, "deform", m.deform.net);
    mlp_to_blobs(bf, "warp", m.wnet.net);
    mlp_to_blobs(bf, "fine", m.fnet.net);
    bf.manifest["tex_height"] = m.tex.height;
    bf.manifest["tex_width"] = m.tex.width;
    bf.manifest["tex_pad"] = m.tex.pad;
    bf.manifest["tex_latent_dim"] = m.tex.latent_dim;
    bf.blobs["tex_coarse"] = to_f32(m.tex.coarse);
    bf.blobs["tex_latent"] = to_f32(m.tex.latent);

    bf.save(path, "GHSA");
}

AvatarModel load_avatar(const std::string& path) {
    BlobFile bf = BlobFile::load(path, "GHSA");
    AvatarModel m;

    Rig& rig = m.rig;
    rig.n_joints = bf.manifest.at("n_joints");
    rig.n_expr = bf.manifest.at("n_expr");
    rig.n_pose = bf.manifest.at("n_pose");
    rig.parents = bf.manifest.at("parents").get<std::vector<int>>();
    auto rest = to_f64(bf.blobs.at("rig_rest_joints"));
    for (int j = 0; j < rig.n_joints; ++j)
        rig.rest_joints.push_back({rest[3 * j], rest[3 * j + 1], rest[3 * j + 2]});
    auto reg = to_f64(bf.blobs.at("rig_joint_regressor"));
    rig.joint_regressor = Eigen::MatrixXd(3 * rig.n_joints, rig.n_expr);
    for (int r = 0; r < rig.joint_regressor.rows(); ++r)
        for (int c = 0; c < rig.n_expr; ++c)
            rig.joint_regressor(r, c) = reg[r * rig.n_expr + c];
    size_t n_verts = bf.manifest.at("n_verts");
    auto verts = to_f64(bf.blobs.at("rig_verts"));
    auto ve = to_f64(bf.blobs.at("rig_vert_expr"));
    auto vp = to_f64(bf.blobs.at("rig_vert_pose"));
    auto vw = to_f64(bf.blobs.at("rig_vert_lbs"));
    int se = rig.n_expr * 3, sp = rig.n_pose * 27, sw = rig.n_joints;
    for (size_t i = 0; i < n_verts; ++i) {
        rig.verts.push_back({verts[3 * i], verts[3 * i + 1], verts[3 * i + 2]});
        rig.vert_expr.emplace_back(ve.begin() + i * se, ve.begin() + (i + 1) * se);
        rig.vert_pose.emplace_back(vp.begin() + i * sp, vp.begin() + (i + 1) * sp);
        rig.vert_lbs.emplace_back(vw.begin() + i * sw, vw.begin() + (i + 1) * sw);
    }

    size_t ng = bf.manifest.at("n_gaussians");
    m.gaussians.sh_bases = bf.manifest.at("sh_bases");
    auto gmu = to_f64(bf.blobs.at("g_mu"));
    auto gsc = to_f64(bf.blobs.at("g_scale"));
    auto gq = to_f64(bf.blobs.at("g_quat"));
    m.gaussians.opacity = to_f64(bf.blobs.at("g_opacity"));
    m.gaussians.sh = to_f64(bf.blobs.at("g_sh"));
    for (size_t i = 0; i < ng; ++i) {
        m.gaussians.mu.push_back({gmu[3 * i], gmu[3 * i + 1], gmu[3 * i + 2]});
        m.gaussians.scale.push_back({gsc[3 * i], gsc[3 * i + 1], gsc[3 * i + 2]});
        m.gaussians.quat.push_back(
            {gq[4 * i], gq[4 * i + 1], gq[4 * i + 2], gq[4 * i + 3]});
    }
    if (m.gaussians.opacity.size() != ng ||
        m.gaussians.sh.size() != ng * m.gaussians.sh_stride())
        throw CorruptAsset("avatar: gaussian blob size mismatch");

    size_t na = bf.manifest.at("n_anchors");
    auto amu = to_f64(bf.blobs.at("a_mu"));
    auto argb = to_f64(bf.blobs.at("a_rgb"));
    auto auv = to_f64(bf.blobs.at("a_target_uv"));
    m.anchors.scale = to_f64(bf.blobs.at("a_scale"));
    m.anchors.opacity = to_f64(bf.blobs.at("a_opacity"));
    for (size_t i = 0; i < na; ++i) {
        m.anchors.mu.push_back({amu[3 * i], amu[3 * i + 1], amu[3 * i + 2]});
        m.anchors.rgb.push_back({argb[3 * i], argb[3 * i + 1], argb[3 * i + 2]});
        m.anchors.target_uv.push_back({auv[2 * i], auv[2 * i + 1]});
    }

    m.deform.net = mlp_from_blobs(bf, "deform");
    m.deform.n_expr = rig.n_expr;
    m.deform.n_pose = rig.n_pose;
    m.deform.n_joints = rig.n_joints;
    m.wnet.net = mlp_from_blobs(bf, "warp");
    m.fnet.net = mlp_from_blobs(bf, "fine");

    m.tex.height = bf.manifest.at("tex_height");
    m.tex.width = bf.manifest.at("tex_width");
    m.tex.pad = bf.manifest.at("tex_pad");
    m.tex.latent_dim = bf.manifest.at("tex_latent_dim");
    m.tex.coarse = to_f64(bf.blobs.at("tex_coarse"));
    m.tex.latent = to_f64(bf.blobs.at("tex_latent"));
    size_t hw = static_cast<size_t>(m.tex.tex_h()) * m.tex.tex_w();
    if (m.tex.coarse.size() != hw * 3 ||
        m.tex.latent.size() != hw * m.tex.latent_dim)
        throw CorruptAsset("avatar: texture blob size mismatch");
    return m;
}

}  // namespace ghs
