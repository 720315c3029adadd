#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "sensorlab/sensorlab.hpp"

namespace sensorlab::testing {

// y = 2x + 1 on x evenly spaced over [0, 1].
inline Dataset linear_fixture(Index n = 50) {
    Dataset d;
    d.input_names = {"x"};
    d.target_name = "y";
    d.inputs.resize(n, 1);
    d.targets.resize(n);
    for (Index i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(n - 1);
        d.inputs(i, 0) = x;
        d.targets(i) = 2.0 * x + 1.0;
    }
    return d;
}

inline Dataset scaled(const Dataset& d) { return fit_apply_scaler(d).second; }

inline Metrics surrogate_metrics(double value) {
    Metrics m;
    m.perf = value;
    m.range = value;
    m.count_percent = 50.0;
    m.rsq = 0.5;
    return m;
}

// Stand-in for a trainer: perf(c) = (c - c*)^2 + k on one coefficient.
struct QuadraticSurrogate {
    Quantity q = Quantity::iw;
    double optimum = 0.0;
    double offset = 0.0;

    Metrics operator()(int, const WeightConfig& cfg) const {
        const double c = coefficient(cfg, q);
        return surrogate_metrics((c - optimum) * (c - optimum) + offset);
    }
};

inline std::filesystem::path temp_dir(const std::string& name) {
    const auto p = std::filesystem::path(SENSORLAB_TEST_TMP) / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace sensorlab::testing
