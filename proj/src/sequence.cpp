#include "ghs/sequence.hpp"

#include <filesystem>
#include <fstream>

#include "nlohmann/json.hpp"

namespace ghs {

namespace {

using nlohmann::json;

json vec2_json(const Vec2& v) { return json::array({v.x, v.y}); }
json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
Vec2 json_vec2(const json& j) { return {j.at(0), j.at(1)}; }
Vec3 json_vec3(const json& j) { return {j.at(0), j.at(1), j.at(2)}; }

std::string resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return p;
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
}

}  // namespace

double FrameSequence::t_norm(int i) const {
    if (frames.size() < 2) return 0.0;
    double t0 = frames.front().timestamp, t1 = frames.back().timestamp;
    if (t1 <= t0) return 0.0;
    return 2.0 * (frames[i].timestamp - t0) / (t1 - t0) - 1.0;
}

void save_sequence(const std::string& path, const FrameSequence& seq) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_sequence: cannot open " + path);
    for (const auto& fr : seq.frames) {
        json j;
        j["index"] = fr.index;
        j["timestamp"] = fr.timestamp;
        json theta = json::array();
        for (const auto& t : fr.theta) theta.push_back(vec3_json(t));
        j["theta"] = theta;
        j["psi"] = fr.psi;
        json rot = json::array();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) rot.push_back(fr.cam.world_to_cam_rot(r, c));
        j["cam"] = {{"rot", rot},
                    {"t", vec3_json(fr.cam.world_to_cam_t)},
                    {"fx", fr.cam.fx},
                    {"fy", fr.cam.fy},
                    {"cx", fr.cam.cx},
                    {"cy", fr.cam.cy},
                    {"width", fr.cam.width},
                    {"height", fr.cam.height}};
        json ldmk = json::array();
        for (const auto& l : fr.ldmk) ldmk.push_back(vec2_json(l));
        j["ldmk"] = ldmk;
        j["has_nose"] = fr.has_nose;
        j["image"] = fr.image_path;
        j["head_mask"] = fr.head_mask_path;
        f << j.dump() << "\n";
    }
}

FrameSequence load_sequence(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_sequence: cannot open " + path);
    std::filesystem::path base = std::filesystem::path(path).parent_path();

    FrameSequence seq;
    std::string line;
    int prev_index = -1;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw CorruptAsset(std::string("load_sequence: bad line: ") + e.what());
        }
        FrameParams fr;
        fr.index = j.at("index");
        if (fr.index <= prev_index)
            throw CorruptAsset("load_sequence: frame indices not increasing");
        prev_index = fr.index;
        fr.timestamp = j.at("timestamp");
        for (const auto& t : j.at("theta")) fr.theta.push_back(json_vec3(t));
        fr.psi = j.at("psi").get<std::vector<double>>();
        const json& c = j.at("cam");
        const json& rot = c.at("rot");
        for (int r = 0; r < 3; ++r)
            for (int col = 0; col < 3; ++col)
                fr.cam.world_to_cam_rot(r, col) = rot.at(r * 3 + col);
        fr.cam.world_to_cam_t = json_vec3(c.at("t"));
        fr.cam.fx = c.at("fx");
        fr.cam.fy = c.at("fy");
        fr.cam.cx = c.at("cx");
        fr.cam.cy = c.at("cy");
        fr.cam.width = c.at("width");
        fr.cam.height = c.at("height");
        for (const auto& l : j.at("ldmk")) fr.ldmk.push_back(json_vec2(l));
        fr.has_nose = j.value("has_nose", true);
        fr.image_path = resolve(base, j.value("image", ""));
        fr.head_mask_path = resolve(base, j.value("head_mask", ""));
        seq.frames.push_back(std::move(fr));
    }
    return seq;
}

}  // namespace ghs
