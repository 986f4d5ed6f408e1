#pragma once

// Complete avatar state (Gaussians, anchors, rig, networks, textures) and its
// single-file asset container.

#include <string>

#include "ghs/anchors.hpp"
#include "ghs/gaussmodel.hpp"
#include "ghs/neuraltex.hpp"
#include "ghs/rig.hpp"

namespace ghs {

struct AvatarModel {
    Rig rig;
    GaussianSet gaussians;  // regular (head + warm-up body) Gaussians
    AnchorSet anchors;      // empty before stage 2
    DeformNet deform;
    NeuralTexture tex;
    WarpNet wnet;
    FineNet fnet;
};

// .ghsa container, magic "GHSA". Round trip is value-exact through float32.
void save_avatar(const std::string& path, const AvatarModel& model);
AvatarModel load_avatar(const std::string& path);

}  // namespace ghs
