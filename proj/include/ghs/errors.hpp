#pragma once

#include <stdexcept>
#include <string>

namespace ghs {

struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvalidQuaternion : InvalidArgument {
    using InvalidArgument::InvalidArgument;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateConfiguration : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientAnchors : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidState : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidAsset : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CorruptAsset : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ghs
