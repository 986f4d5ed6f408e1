#include "ghs/oneeuro.hpp"

#include <cmath>

namespace ghs {

namespace {

double smoothing_alpha(double cutoff, double dt) {
    double tau = 1.0 / (2.0 * M_PI * cutoff);
    return 1.0 / (1.0 + tau / dt);
}

}  // namespace

void OneEuroFilter::reset() {
    primed_ = false;
    x_hat_.clear();
    dx_hat_.clear();
}

std::vector<double> OneEuroFilter::filter(const std::vector<double>& x,
                                          double timestamp) {
    if (!primed_) {
        primed_ = true;
        prev_t_ = timestamp;
        x_hat_ = x;
        dx_hat_.assign(x.size(), 0.0);
        return x;
    }
    if (timestamp <= prev_t_)
        throw InvalidArgument("OneEuroFilter: timestamps must be strictly increasing");
    if (x.size() != x_hat_.size())
        throw ShapeError("OneEuroFilter: channel count changed");

    double dt = timestamp - prev_t_;
    prev_t_ = timestamp;
    double a_d = smoothing_alpha(d_cutoff, dt);
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        double dx = (x[i] - x_hat_[i]) / dt;
        dx_hat_[i] = a_d * dx + (1.0 - a_d) * dx_hat_[i];
        double cutoff = f_c_min + beta * std::abs(dx_hat_[i]);
        double a = smoothing_alpha(cutoff, dt);
        x_hat_[i] = a * x[i] + (1.0 - a) * x_hat_[i];
        out[i] = x_hat_[i];
    }
    return out;
}

}  // namespace ghs
