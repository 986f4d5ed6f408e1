#pragma once

// Procedural test scene: a Gaussian-cloud head rigidly attached to the toy
// rig's head bone, composited over a striped body/background layer whose
// motion is an exact per-frame image-plane homography. Emits ground-truth
// images, head masks, frame parameters and the generating homographies.

#include <string>

#include "ghs/gaussmodel.hpp"
#include "ghs/image.hpp"
#include "ghs/sequence.hpp"

namespace ghs {

struct SyntheticConfig {
    int width = 128, height = 128;
    int n_frames = 48;
    int n_head_gaussians = 256;
    double motion_scale = 1.0;  // 0 freezes all motion
    double fps = 25.0;
    unsigned seed = 1;
};

struct SyntheticScene {
    SyntheticConfig config;
    Rig rig;
    GaussianSet head_gt;             // canonical head cloud (head-bone rigid)
    FrameSequence seq;
    std::vector<Mat3> homographies;  // image px -> canonical body px, h33 = 1
};

// Canonical body appearance at (possibly fractional) canonical pixel uv:
// white background above a soft shoulder line, smooth stripes below.
Vec3 synthetic_body_color(const Vec2& uv, int width, int height);

// Image px -> canonical px homography for a normalized time in [0,1].
Mat3 synthetic_homography(const SyntheticConfig& cfg, double t01);

// Ground-truth render of one frame (head splats over the warped body layer)
// and the head alpha mask.
struct SyntheticFrameRender {
    Image rgb;        // H x W x 3
    Image head_mask;  // H x W x 1
};
SyntheticFrameRender render_synthetic_frame(const SyntheticScene& scene,
                                            int frame_idx);

// Build the scene in memory (no files).
SyntheticScene make_synthetic(const SyntheticConfig& cfg);

// Build and write PNG frames/masks, sequence.jsonl, rig.rig and gt.blob into
// out_dir. Returns the scene.
SyntheticScene make_synthetic(const SyntheticConfig& cfg,
                              const std::string& out_dir);

// Ground-truth container round-trip for oracle checks.
void save_synthetic_gt(const std::string& path, const SyntheticScene& scene);
SyntheticScene load_synthetic_gt(const std::string& path,
                                 const std::string& seq_path);

}  // namespace ghs
