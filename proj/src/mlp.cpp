#include "ghs/mlp.hpp"

#include <atomic>

namespace ghs {

namespace {
std::atomic<std::int64_t> g_query_count{0};
}

std::int64_t mlp_query_count() { return g_query_count.load(); }
void mlp_reset_query_count() { g_query_count.store(0); }

void MlpGrads::add_scaled(const MlpGrads& o, double s) {
    for (size_t l = 0; l < W.size(); ++l) {
        W[l] += s * o.W[l];
        b[l] += s * o.b[l];
    }
}

void MlpGrads::set_zero() {
    for (auto& m : W) m.setZero();
    for (auto& v : b) v.setZero();
}

Mlp Mlp::make(int input_dim, int width, int n_hidden, int output_dim,
              std::mt19937& rng) {
    Mlp net;
    int in = input_dim;
    for (int l = 0; l < n_hidden; ++l) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / in));
        Eigen::MatrixXd Wl(width, in);
        for (int r = 0; r < Wl.rows(); ++r)
            for (int c = 0; c < Wl.cols(); ++c) Wl(r, c) = dist(rng);
        net.W.push_back(std::move(Wl));
        net.b.push_back(Eigen::VectorXd::Zero(width));
        in = width;
    }
    net.W.push_back(Eigen::MatrixXd::Zero(output_dim, in));
    net.b.push_back(Eigen::VectorXd::Zero(output_dim));
    return net;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& X, Cache* cache) const {
    g_query_count += X.rows();
    if (cache) {
        cache->acts.clear();
        cache->acts.push_back(X);
    }
    Eigen::MatrixXd A = X;
    int L = n_layers();
    for (int l = 0; l < L; ++l) {
        Eigen::MatrixXd Z = A * W[l].transpose();
        Z.rowwise() += b[l].transpose();
        if (l + 1 < L) {
            A = Z.cwiseMax(0.0);
            if (cache) cache->acts.push_back(A);
        } else {
            A = std::move(Z);
        }
    }
    return A;
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& dY,
                              MlpGrads& grads, bool need_dx) const {
    int L = n_layers();
    Eigen::MatrixXd d = dY;
    for (int l = L - 1; l >= 0; --l) {
        const Eigen::MatrixXd& A = cache.acts[l];
        grads.W[l].noalias() += d.transpose() * A;
        grads.b[l] += d.colwise().sum().transpose();
        if (l > 0) {
            Eigen::MatrixXd dA = d * W[l];
            // ReLU mask from the cached post-activation.
            d = dA.cwiseProduct((A.array() > 0.0).cast<double>().matrix());
        } else if (need_dx) {
            return d * W[0];
        }
    }
    return {};
}

MlpGrads Mlp::zero_grads() const {
    MlpGrads g;
    for (size_t l = 0; l < W.size(); ++l) {
        g.W.push_back(Eigen::MatrixXd::Zero(W[l].rows(), W[l].cols()));
        g.b.push_back(Eigen::VectorXd::Zero(b[l].size()));
    }
    return g;
}

}  // namespace ghs
