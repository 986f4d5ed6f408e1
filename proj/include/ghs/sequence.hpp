#pragma once

// JSON-lines frame sequences: one FrameParams record per line. Image paths
// are stored relative to the sequence file and resolved on load.

#include <string>

#include "ghs/rig.hpp"

namespace ghs {

struct FrameSequence {
    std::vector<FrameParams> frames;

    int size() const { return static_cast<int>(frames.size()); }
    // Normalized time in [-1, 1] for frame i (0 when the sequence has a
    // single frame).
    double t_norm(int i) const;
};

FrameSequence load_sequence(const std::string& path);
void save_sequence(const std::string& path, const FrameSequence& seq);

}  // namespace ghs
