#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sensorlab/netcore.hpp"

namespace sl = sensorlab;

namespace {

sl::MlpParams random_params(std::mt19937_64& rng, Eigen::Index d, Eigen::Index h) {
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    sl::MlpParams p;
    p.iw.resize(h, d);
    p.b1.resize(h);
    p.lw.resize(h);
    for (Eigen::Index j = 0; j < h; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) {
            p.iw(j, i) = u(rng);
        }
        p.b1(j) = u(rng);
        p.lw(j) = u(rng);
    }
    p.b2 = u(rng);
    return p;
}

} // namespace

TEST(InitParams, SingleElementIsUnperturbed) {
    const auto p = sl::init_params(1, 1, {1, 1, 1, 1});
    EXPECT_EQ(p.iw(0, 0), 1.0);
    EXPECT_EQ(p.b1(0), 1.0);
    EXPECT_EQ(p.lw(0), 1.0);
    EXPECT_EQ(p.b2, 1.0);
}

TEST(InitParams, PerturbationRampPerMatrix) {
    // Set 3 shape: IW = 1, B1 = 0, B2 = 0, LW = 1.
    const auto p = sl::init_params(1, 2, sl::weight_config(sl::SetId{3}));
    EXPECT_EQ(p.iw(0, 0), 1.0);
    EXPECT_EQ(p.iw(1, 0), 1.001);
    EXPECT_EQ(p.b1(0), 0.0);
    EXPECT_EQ(p.b1(1), 0.0);
    EXPECT_EQ(p.lw(0), 1.0);
    EXPECT_EQ(p.lw(1), 1.001);
    EXPECT_EQ(p.b2, 0.0);
}

TEST(InitParams, RowMajorRampAcrossInputs) {
    const auto p = sl::init_params(3, 2, {2.0, 0.5, -1.0, 1.0});
    // k = j*d + i
    EXPECT_EQ(p.iw(0, 2), 2.0 * (1.0 + 2e-3));
    EXPECT_EQ(p.iw(1, 0), 2.0 * (1.0 + 3e-3));
    EXPECT_EQ(p.b1(1), 0.5 * (1.0 + 1e-3));
    EXPECT_EQ(p.b2, -1.0);
}

TEST(InitParams, ZeroCoefficientGivesExactZeros) {
    const auto p = sl::init_params(3, 7, sl::weight_config(sl::SetId{6}));
    EXPECT_TRUE((p.iw.array() == 0.0).all());
    EXPECT_FALSE(std::signbit(p.iw(6, 2)));
}

TEST(InitParams, PureFunction) {
    const sl::WeightConfig cfg{-0.7, 3.1, 0.2, 4.9};
    EXPECT_TRUE(sl::init_params(3, 12, cfg) == sl::init_params(3, 12, cfg));
    EXPECT_THROW((void)sl::init_params(0, 3, cfg), sl::ConfigError);
    EXPECT_THROW((void)sl::init_params(2, 0, cfg), sl::ConfigError);
}

TEST(SetConfigs, MatchTheSixConfigurations) {
    const sl::WeightConfig expected[] = {{1, 1, 1, 0}, {1, 1, 1, 1}, {1, 0, 0, 1}, {1, 1, 0, 1}, {1, 0, 1, 1}, {0, 1, 1, 1}};
    for (int id = 1; id <= 6; ++id) {
        EXPECT_EQ(sl::weight_config(sl::SetId{id}), expected[id - 1]) << "set " << id;
    }
    EXPECT_THROW((void)sl::weight_config(sl::SetId{7}), sl::ConfigError);
}

TEST(Forward, WorkedValues) {
    sl::MlpParams zero = sl::init_params(2, 3, {0, 0, 0, 0});
    EXPECT_EQ(sl::forward(zero, Eigen::Vector2d(0.3, -7.0)), 0.0);

    auto p = sl::init_params(1, 1, {1, 0, 1, 1});
    EXPECT_NEAR(sl::forward(p, Eigen::VectorXd::Constant(1, 1.0)), 1.0 + std::tanh(1.0), 1e-15);
    EXPECT_NEAR(sl::forward(p, Eigen::VectorXd::Constant(1, 1.0)), 1.76159, 1e-5);

    const auto set1 = sl::init_params(3, 5, sl::weight_config(sl::SetId{1}));
    for (double x : {-1.0, 0.0, 0.4, 1.0}) {
        EXPECT_EQ(sl::forward(set1, Eigen::Vector3d::Constant(x)), 1.0);
    }
}

TEST(Forward, BatchedPredictMatchesPerRow) {
    std::mt19937_64 rng(17);
    const auto p = random_params(rng, 3, 4);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(9, 3);
    const Eigen::VectorXd y = sl::predict(p, x);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        EXPECT_NEAR(y(r), sl::forward(p, x.row(r).transpose()), 1e-14);
    }
}

TEST(Flatten, UnflattenIsExactInverse) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index d = 1 + trial % 3;
        const Eigen::Index h = 1 + trial % 5;
        const auto p = random_params(rng, d, h);
        const auto theta = p.flatten();
        ASSERT_EQ(theta.size(), h * d + 2 * h + 1);
        EXPECT_TRUE(sl::MlpParams::unflatten(d, h, theta) == p);
        EXPECT_EQ(theta(0), p.iw(0, 0));
        EXPECT_EQ(theta(h * d), p.b1(0));
        EXPECT_EQ(theta(h * d + h), p.lw(0));
        EXPECT_EQ(theta(theta.size() - 1), p.b2);
    }
    EXPECT_THROW((void)sl::MlpParams::unflatten(2, 2, Eigen::VectorXd::Zero(3)), sl::NumericError);
}

TEST(Jacobian, BiasColumnIsOnes) {
    std::mt19937_64 rng(2);
    const auto p = random_params(rng, 2, 3);
    const auto j = sl::jacobian(p, Eigen::MatrixXd::Random(6, 2));
    EXPECT_TRUE((j.col(j.cols() - 1).array() == 1.0).all());
}

TEST(Jacobian, ZeroLayerWeightsBlockInputGradient) {
    auto p = sl::init_params(3, 4, sl::weight_config(sl::SetId{1}));
    const auto j = sl::jacobian(p, Eigen::MatrixXd::Random(8, 3));
    EXPECT_TRUE((j.leftCols(12).array() == 0.0).all());
    EXPECT_TRUE((j.middleCols(12, 4).array() == 0.0).all()); // b1 too
    EXPECT_FALSE((j.middleCols(16, 4).array() == 0.0).all());
}

// Central differences through forward() only.
TEST(Jacobian, MatchesCentralDifferences) {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> dim(1, 3);
    std::uniform_int_distribution<int> hid(1, 5);
    std::uniform_int_distribution<int> rows(1, 10);
    const double step = 1e-6;
    for (int trial = 0; trial < 20; ++trial) {
        const int d = dim(rng);
        const int h = hid(rng);
        const int n = rows(rng);
        const auto p = random_params(rng, d, h);
        Eigen::MatrixXd x(n, d);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < d; ++c) {
                x(r, c) = u(rng);
            }
        }
        const auto jac = sl::jacobian(p, x);
        const auto theta = p.flatten();
        for (Eigen::Index k = 0; k < theta.size(); ++k) {
            auto plus = theta;
            auto minus = theta;
            plus(k) += step;
            minus(k) -= step;
            const auto pp = sl::MlpParams::unflatten(d, h, plus);
            const auto pm = sl::MlpParams::unflatten(d, h, minus);
            for (int r = 0; r < n; ++r) {
                const Eigen::VectorXd xr = x.row(r).transpose();
                const double fd = (sl::forward(pp, xr) - sl::forward(pm, xr)) / (2.0 * step);
                ASSERT_LE(std::abs(jac(r, k) - fd), 1e-5 * std::max(1.0, std::abs(fd)))
                    << "trial " << trial << " row " << r << " param " << k;
            }
        }
    }
}
