#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace sl = sensorlab;
using sl::testing::linear_fixture;
using sl::testing::scaled;

namespace {

double mse(const sl::MlpParams& p, const sl::Dataset& d) {
    return (sl::predict(p, d.inputs) - d.targets).squaredNorm() / static_cast<double>(d.size());
}

double subset_sse(const sl::MlpParams& p, const sl::Dataset& d, const std::vector<sl::Index>& rows) {
    const auto s = d.subset(rows);
    return (sl::predict(p, s.inputs) - s.targets).squaredNorm();
}

// y = 2x + 1 + N(0, sd^2), x uniform on [0, 1].
sl::Dataset noisy_linear(sl::Index n, double sd, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, sd);
    sl::Dataset d;
    d.input_names = {"x"};
    d.target_name = "y";
    d.inputs.resize(n, 1);
    d.targets.resize(n);
    for (sl::Index i = 0; i < n; ++i) {
        d.inputs(i, 0) = u(rng);
        d.targets(i) = 2.0 * d.inputs(i, 0) + 1.0 + noise(rng);
    }
    return d;
}

sl::TrainOptions epochs(int n) {
    sl::TrainOptions o;
    o.max_epochs = n;
    return o;
}

} // namespace

TEST(TrainerKind, Parsing) {
    EXPECT_EQ(sl::parse_trainer("LM"), sl::TrainerKind::lm);
    EXPECT_EQ(sl::parse_trainer("trainbr"), sl::TrainerKind::br);
    EXPECT_EQ(sl::parse_trainer("br"), sl::TrainerKind::br);
    EXPECT_THROW((void)sl::parse_trainer("adam"), sl::ConfigError);
}

TEST(TrainOptions, DefaultsAndValidation) {
    const sl::TrainOptions o;
    EXPECT_EQ(o.max_epochs, 1000);
    EXPECT_EQ(o.mu0, 1e-3);
    EXPECT_EQ(o.mu_inc, 10.0);
    EXPECT_EQ(o.mu_dec, 0.1);
    EXPECT_EQ(o.mu_max, 1e10);
    EXPECT_EQ(o.max_fail, 6);
    EXPECT_EQ(o.min_grad, 1e-7);
    auto bad = o;
    bad.mu_dec = 1.5;
    EXPECT_THROW(bad.validate(), sl::ConfigError);
}

TEST(TrainLm, FitsLinearTarget) {
    const auto data = scaled(linear_fixture());
    const auto split = sl::interleaved_split(data.size());
    const auto init = sl::init_params(1, 3, sl::weight_config(sl::SetId{2}));
    const auto model = sl::train_lm(init, data, split, epochs(200));
    EXPECT_LT(mse(model.params, data), 1e-6);
    EXPECT_LE(model.epochs_run, 200);
}

TEST(TrainLm, DeterministicForSameInputs) {
    const auto data = scaled(noisy_linear(120, 0.2, 4));
    const auto split = sl::interleaved_split(data.size());
    const auto init = sl::init_params(1, 5, sl::weight_config(sl::SetId{4}));
    const auto a = sl::train_lm(init, data, split, epochs(100));
    const auto b = sl::train_lm(init, data, split, epochs(100));
    EXPECT_TRUE(a.params == b.params);
    EXPECT_EQ(a.epochs_run, b.epochs_run);
}

TEST(TrainLm, ReturnsLowestValidationParameters) {
    const auto data = scaled(noisy_linear(150, 0.3, 6));
    const auto split = sl::interleaved_split(data.size());
    const auto init = sl::init_params(1, 12, sl::weight_config(sl::SetId{2}));
    const auto model = sl::train_lm(init, data, split, epochs(300));
    double best = subset_sse(init, data, split.val);
    for (const auto& r : model.history) {
        best = std::min(best, r.val_sse);
    }
    EXPECT_DOUBLE_EQ(subset_sse(model.params, data, split.val), best);
    if (model.best_epoch > 0) {
        EXPECT_EQ(model.history[static_cast<std::size_t>(model.best_epoch - 1)].val_sse, best);
    }
}

TEST(TrainLm, StopsOnValidationPatience) {
    // validation rows carry the opposite slope, so fitting the training rows
    // can only hurt them
    auto d = linear_fixture(60);
    const auto split = sl::interleaved_split(d.size());
    for (auto i : split.val) {
        d.targets(i) = 3.0 - 2.0 * d.inputs(i, 0);
    }
    const auto data = scaled(d);
    const auto init = sl::init_params(1, 3, sl::weight_config(sl::SetId{2}));
    sl::TrainOptions o;
    o.max_fail = 3;
    const auto model = sl::train_lm(init, data, split, o);
    EXPECT_EQ(model.stop_reason, sl::StopReason::val_patience);
    EXPECT_LT(model.epochs_run, 50);
}

TEST(TrainLm, ZeroErrorConverges) {
    // Set 1 has LW = 0, so the network outputs B2 = 1 everywhere
    auto d = linear_fixture(20);
    d.targets.setOnes();
    const auto data = scaled(d);
    const auto init = sl::init_params(1, 4, sl::weight_config(sl::SetId{1}));
    const auto model = sl::train_lm(init, data, sl::interleaved_split(20), {});
    EXPECT_EQ(model.stop_reason, sl::StopReason::converged);
    EXPECT_EQ(model.epochs_run, 1);
    EXPECT_TRUE(model.params == init);
}

TEST(TrainLm, MinimumGradientStop) {
    const auto data = scaled(linear_fixture(20));
    const auto init = sl::init_params(1, 2, sl::weight_config(sl::SetId{2}));
    sl::TrainOptions o;
    o.min_grad = 1e12;
    const auto model = sl::train_lm(init, data, sl::interleaved_split(20), o);
    EXPECT_EQ(model.stop_reason, sl::StopReason::min_grad);
    EXPECT_TRUE(model.params == init);
}

TEST(TrainLm, EpochBudget) {
    const auto data = scaled(noisy_linear(100, 0.2, 1));
    const auto init = sl::init_params(1, 6, sl::weight_config(sl::SetId{5}));
    const auto model = sl::train_lm(init, data, sl::interleaved_split(100), epochs(3));
    EXPECT_LE(model.epochs_run, 3);
    ASSERT_FALSE(model.history.empty());
    EXPECT_LE(model.history.back().train_sse, model.initial_train_sse);
}

TEST(TrainLm, RejectsMismatchedInputs) {
    const auto data = scaled(linear_fixture(20));
    const auto init = sl::init_params(2, 2, sl::weight_config(sl::SetId{2}));
    EXPECT_THROW((void)sl::train_lm(init, data, sl::interleaved_split(20), {}), sl::DataError);
}

TEST(TrainBr, FitsLinearTarget) {
    const auto data = scaled(linear_fixture());
    const auto split = sl::interleaved_split(data.size());
    const auto init = sl::init_params(1, 2, sl::weight_config(sl::SetId{2}));
    const auto model = sl::train_br(init, data, split, epochs(300));
    EXPECT_LT(mse(model.params, data), 1e-5);
}

TEST(TrainBr, HyperparametersStayValid) {
    const auto data = scaled(noisy_linear(200, 0.3, 2));
    const auto init = sl::init_params(1, 10, sl::weight_config(sl::SetId{2}));
    const auto model = sl::train_br(init, data, sl::interleaved_split(200), epochs(200));
    const double p = static_cast<double>(init.parameter_count());
    ASSERT_FALSE(model.history.empty());
    for (const auto& r : model.history) {
        EXPECT_GT(r.alpha, 0.0);
        EXPECT_GT(r.beta, 0.0);
        EXPECT_GE(r.gamma, 0.0);
        EXPECT_LE(r.gamma, p);
    }
    EXPECT_EQ(model.gamma, model.history.back().gamma);
    // a noisy line needs few effective parameters
    EXPECT_LT(model.gamma, p / 2.0);
}

TEST(TrainBr, SmallerWeightsThanLm) {
    const auto data = scaled(noisy_linear(200, 0.3, 5));
    const auto split = sl::interleaved_split(200);
    const auto init = sl::init_params(1, 10, sl::weight_config(sl::SetId{2}));
    const auto lm = sl::train_lm(init, data, split, epochs(200));
    const auto br = sl::train_br(init, data, split, epochs(200));
    EXPECT_LE(br.params.flatten().squaredNorm(), lm.params.flatten().squaredNorm());
}

TEST(History, CsvColumnsPerTrainer) {
    const auto data = scaled(linear_fixture(20));
    const auto init = sl::init_params(1, 2, sl::weight_config(sl::SetId{2}));
    const auto split = sl::interleaved_split(20);
    std::ostringstream lm, br;
    sl::write_history_csv(lm, sl::train_lm(init, data, split, epochs(2)));
    sl::write_history_csv(br, sl::train_br(init, data, split, epochs(2)));
    EXPECT_EQ(lm.str().substr(0, lm.str().find('\n')), "epoch,train_sse,val_sse,mu");
    EXPECT_EQ(br.str().substr(0, br.str().find('\n')), "epoch,train_sse,val_sse,mu,alpha,beta,gamma");
}
