#pragma once

// One Euro filter for landmark / pose smoothing: adaptive first-order
// low-pass whose cutoff rises with signal speed.

#include <vector>

#include "ghs/errors.hpp"

namespace ghs {

struct OneEuroFilter {
    double f_c_min = 1.0;    // minimum cutoff frequency, Hz
    double beta = 0.007;     // speed coefficient
    double d_cutoff = 1.0;   // derivative low-pass cutoff, Hz

    // Filters one multi-channel sample. Timestamps must be strictly
    // increasing, else InvalidArgument.
    std::vector<double> filter(const std::vector<double>& x, double timestamp);

    void reset();

private:
    bool primed_ = false;
    double prev_t_ = 0;
    std::vector<double> x_hat_, dx_hat_;
};

}  // namespace ghs
