#pragma once

// Single-file binary container shared by the avatar (.ghsa), baked (.baked)
// and rig (.rig) assets: 4 magic bytes, version, endian sentinel, a
// length-prefixed JSON manifest, then aligned little-endian float32 blobs.
// Blob checksums live in the manifest and are verified on load.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ghs/errors.hpp"
#include "nlohmann/json.hpp"

namespace ghs {

struct BlobFile {
    nlohmann::json manifest;  // user fields; "blobs" is reserved
    std::map<std::string, std::vector<float>> blobs;

    void save(const std::string& path, const std::string& magic) const;
    // Throws CorruptAsset naming the offending field on any mismatch.
    static BlobFile load(const std::string& path, const std::string& magic);
};

// Helpers for shuttling double-precision state through float32 blobs.
std::vector<float> to_f32(const std::vector<double>& v);
std::vector<double> to_f64(const std::vector<float>& v);

}  // namespace ghs
