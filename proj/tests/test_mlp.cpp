#include <random>

#include "doctest.h"
#include "ghs/mlp.hpp"

using namespace ghs;

TEST_CASE("zero-initialized output layer predicts zero") {
    std::mt19937 rng(1);
    Mlp net = Mlp::make(4, 16, 2, 3, rng);
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 4);
    Eigen::MatrixXd Y = net.forward(X);
    CHECK(Y.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("forward matches manual matrix chain") {
    std::mt19937 rng(2);
    Mlp net = Mlp::make(3, 8, 2, 2, rng);
    std::normal_distribution<double> g(0.0, 0.3);
    for (auto& W : net.W)
        for (int r = 0; r < W.rows(); ++r)
            for (int c = 0; c < W.cols(); ++c) W(r, c) = g(rng);
    for (auto& b : net.b)
        for (int r = 0; r < b.size(); ++r) b(r) = g(rng);

    Eigen::MatrixXd X = Eigen::MatrixXd::Random(4, 3);
    Eigen::MatrixXd Y = net.forward(X);

    Eigen::MatrixXd A = X;
    for (int l = 0; l < net.n_layers(); ++l) {
        A = (A * net.W[l].transpose()).rowwise() + net.b[l].transpose();
        if (l + 1 < net.n_layers()) A = A.cwiseMax(0.0);
    }
    CHECK((Y - A).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward matches finite differences") {
    std::mt19937 rng(3);
    Mlp net = Mlp::make(3, 6, 2, 2, rng);
    std::normal_distribution<double> g(0.0, 0.5);
    for (auto& W : net.W)
        for (int r = 0; r < W.rows(); ++r)
            for (int c = 0; c < W.cols(); ++c) W(r, c) = g(rng);

    Eigen::MatrixXd X = Eigen::MatrixXd::Random(4, 3);
    Eigen::MatrixXd T = Eigen::MatrixXd::Random(4, 2);
    auto loss = [&](const Mlp& m) {
        Eigen::MatrixXd Y = m.forward(X);
        return 0.5 * (Y - T).squaredNorm();
    };

    Mlp::Cache cache;
    Eigen::MatrixXd Y = net.forward(X, &cache);
    MlpGrads grads = net.zero_grads();
    Eigen::MatrixXd dX = net.backward(cache, Y - T, grads, true);

    const double eps = 1e-6;
    for (int l = 0; l < net.n_layers(); ++l)
        for (int k = 0; k < 3; ++k) {
            int r = k % net.W[l].rows(), c = (k * 7) % net.W[l].cols();
            Mlp m = net;
            m.W[l](r, c) += eps;
            double lp = loss(m);
            m.W[l](r, c) -= 2 * eps;
            double lm = loss(m);
            double fd = (lp - lm) / (2 * eps);
            CHECK(grads.W[l](r, c) == doctest::Approx(fd).epsilon(1e-5));
        }
    // input gradient
    for (int k = 0; k < 4; ++k) {
        Eigen::MatrixXd Xp = X, Xm = X;
        Xp(k, k % 3) += eps;
        Xm(k, k % 3) -= eps;
        Mlp m = net;
        Eigen::MatrixXd Yp = m.forward(Xp), Ym = m.forward(Xm);
        double fd = (0.5 * (Yp - T).squaredNorm() - 0.5 * (Ym - T).squaredNorm()) /
                    (2 * eps);
        CHECK(dX(k, k % 3) == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("query counter counts rows") {
    std::mt19937 rng(4);
    Mlp net = Mlp::make(2, 4, 1, 1, rng);
    mlp_reset_query_count();
    net.forward(Eigen::MatrixXd::Random(7, 2));
    CHECK(mlp_query_count() == 7);
    net.forward(Eigen::MatrixXd::Random(3, 2));
    CHECK(mlp_query_count() == 10);
    mlp_reset_query_count();
    CHECK(mlp_query_count() == 0);
}
