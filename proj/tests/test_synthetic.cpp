#include <gtest/gtest.h>

#include "sensorlab/synthetic.hpp"

namespace sl = sensorlab;

TEST(EngineModel, ReferencePoint) {
    // 120 + 100 - 15 + 40 - 0
    EXPECT_DOUBLE_EQ(sl::engine_oil_pressure(1000.0, 50.0, 90.0), 245.0);
    EXPECT_DOUBLE_EQ(sl::engine_oil_pressure(1000.0, 50.0, 100.0), 239.0);
}

TEST(EngineModel, IncreasingInRpmOverOperatingRange) {
    for (double rpm = 650.0; rpm < 2500.0; rpm += 10.0) {
        EXPECT_LT(sl::engine_oil_pressure(rpm, 30.0, 80.0), sl::engine_oil_pressure(rpm + 10.0, 30.0, 80.0));
    }
}

TEST(Generator, SameSeedSameBits) {
    const sl::EngineGenSpec spec{.n = 300, .seed = 42, .noise_sd = 0.5};
    const auto a = sl::generate_engine_dataset(spec);
    const auto b = sl::generate_engine_dataset(spec);
    EXPECT_TRUE(a.inputs == b.inputs);
    EXPECT_TRUE(a.targets == b.targets);
}

TEST(Generator, DifferentSeedsDiffer) {
    const auto a = sl::generate_engine_dataset({.n = 50, .seed = 1});
    const auto b = sl::generate_engine_dataset({.n = 50, .seed = 2});
    EXPECT_FALSE(a.inputs == b.inputs);
}

TEST(Generator, ColumnsRangesAndNoiseFreeTargets) {
    const auto d = sl::generate_engine_dataset({.n = 1000, .seed = 3, .noise_sd = 0.0});
    EXPECT_EQ(d.input_names, (std::vector<std::string>{"engine_speed_rpm", "load_pct", "oil_temp_C"}));
    EXPECT_EQ(d.target_name, "oil_pressure_kPa");
    EXPECT_GE(d.inputs.col(0).minCoeff(), 650.0);
    EXPECT_LT(d.inputs.col(0).maxCoeff(), 2500.0);
    EXPECT_GE(d.inputs.col(1).minCoeff(), 0.0);
    EXPECT_LT(d.inputs.col(1).maxCoeff(), 100.0);
    EXPECT_GE(d.inputs.col(2).minCoeff(), 60.0);
    EXPECT_LT(d.inputs.col(2).maxCoeff(), 110.0);
    for (sl::Index i = 0; i < d.size(); ++i) {
        EXPECT_EQ(d.targets(i), sl::engine_oil_pressure(d.inputs(i, 0), d.inputs(i, 1), d.inputs(i, 2)));
    }
}

TEST(Generator, NoiseHasRequestedSpread) {
    const auto clean = sl::generate_engine_dataset({.n = 20000, .seed = 9, .noise_sd = 0.0});
    const auto noisy = sl::generate_engine_dataset({.n = 20000, .seed = 9, .noise_sd = 2.0});
    const Eigen::ArrayXd r = (noisy.targets - clean.targets).array();
    const double mean = r.mean();
    const double sd = std::sqrt((r - mean).square().sum() / static_cast<double>(r.size() - 1));
    EXPECT_NEAR(mean, 0.0, 0.05);
    EXPECT_NEAR(sd, 2.0, 0.05);
}

TEST(Generator, RejectsBadSpecs) {
    EXPECT_THROW((void)sl::generate_engine_dataset({.n = 4}), sl::ConfigError);
    EXPECT_THROW((void)sl::generate_engine_dataset({.n = 10, .seed = 1, .noise_sd = -1.0}), sl::ConfigError);
}
