#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "sensorlab/error.hpp"

namespace sensorlab {

/// The four performance parameters. perf is in squared target units.
struct Metrics {
    double perf = 0.0;
    double count_percent = 0.0;
    double range = 0.0;
    double rsq = 0.0;
    // Set when preds or targets have no spread, which forces rsq to 0.
    bool rsq_degenerate = false;
    // Number of points whose target is exactly 0.
    std::size_t zero_targets = 0;

    bool operator==(const Metrics&) const = default;
};

// Accuracy threshold counted by count_percent.
inline constexpr double accuracy_threshold = 99.0;

/// Point accuracy in percent: 100 * (1 - |pred - target| / |target|), floored
/// at 0. A zero target scores 100 only for an exact zero prediction.
inline double point_accuracy(double pred, double target) noexcept {
    if (target == 0.0) {
        return pred == 0.0 ? 100.0 : 0.0;
    }
    return std::max(0.0, 100.0 - 100.0 * std::abs(pred - target) / std::abs(target));
}

inline Metrics compute_metrics(std::span<const double> preds, std::span<const double> targets) {
    if (preds.size() != targets.size()) {
        throw DataError("prediction/target length mismatch: " + std::to_string(preds.size()) + " vs " +
                        std::to_string(targets.size()));
    }
    const std::size_t n = preds.size();
    if (n < 2) {
        throw DataError("metrics need at least 2 points");
    }

    Metrics m;
    double sse = 0.0;
    std::size_t hits = 0;
    double acc_min = 100.0;
    double acc_max = 0.0;
    double mean_p = 0.0;
    double mean_t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = preds[i] - targets[i];
        sse += e * e;
        const double acc = point_accuracy(preds[i], targets[i]);
        if (targets[i] == 0.0) {
            ++m.zero_targets;
        }
        if (acc >= accuracy_threshold) {
            ++hits;
        }
        acc_min = std::min(acc_min, acc);
        acc_max = std::max(acc_max, acc);
        mean_p += preds[i];
        mean_t += targets[i];
    }
    const auto nd = static_cast<double>(n);
    m.perf = sse / nd;
    m.count_percent = 100.0 * static_cast<double>(hits) / nd;
    m.range = acc_max - acc_min;

    mean_p /= nd;
    mean_t /= nd;
    double spp = 0.0;
    double stt = 0.0;
    double spt = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dp = preds[i] - mean_p;
        const double dt = targets[i] - mean_t;
        spp += dp * dp;
        stt += dt * dt;
        spt += dp * dt;
    }
    if (spp > 0.0 && stt > 0.0) {
        const double r = spt / std::sqrt(spp * stt);
        m.rsq = std::min(1.0, r * r);
    } else {
        m.rsq = 0.0;
        m.rsq_degenerate = true;
    }
    if (!std::isfinite(m.perf) || !std::isfinite(m.rsq)) {
        throw NumericError("non-finite metrics (perf=" + std::to_string(m.perf) + ")");
    }
    return m;
}

} // namespace sensorlab
