#pragma once

// Batched fully-connected MLP with ReLU hidden activations. The output layer
// is linear; callers apply their own head activation (softmax / tanh / none).
// Every forward bumps a process-wide query counter so MLP-free code paths can
// assert they never touch a network.

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace ghs {

// Row-major matrix for batched per-point data whose rows are handed out as
// contiguous arrays.
using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::int64_t mlp_query_count();
void mlp_reset_query_count();

struct MlpGrads {
    std::vector<Eigen::MatrixXd> W;
    std::vector<Eigen::VectorXd> b;

    void add_scaled(const MlpGrads& o, double s);
    void set_zero();
};

class Mlp {
public:
    // Weight matrices are (out x in); y = W x + b.
    std::vector<Eigen::MatrixXd> W;
    std::vector<Eigen::VectorXd> b;

    Mlp() = default;

    // n_hidden hidden layers of `width` units. Hidden layers use He init;
    // the output layer is zero-initialized so the net predicts 0 at start.
    static Mlp make(int input_dim, int width, int n_hidden, int output_dim,
                    std::mt19937& rng);

    int input_dim() const { return W.empty() ? 0 : static_cast<int>(W.front().cols()); }
    int output_dim() const { return W.empty() ? 0 : static_cast<int>(W.back().rows()); }
    int n_layers() const { return static_cast<int>(W.size()); }

    struct Cache {
        // acts[0] = input, acts[l] = post-ReLU output of layer l for
        // l = 1..n_layers-1.
        std::vector<Eigen::MatrixXd> acts;
    };

    // X is (batch x input_dim); returns (batch x output_dim).
    Eigen::MatrixXd forward(const Eigen::MatrixXd& X, Cache* cache = nullptr) const;

    // Accumulates weight gradients into `grads`; returns d(loss)/dX when
    // need_dx is set (empty matrix otherwise).
    Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& dY,
                             MlpGrads& grads, bool need_dx = false) const;

    MlpGrads zero_grads() const;
};

}  // namespace ghs
