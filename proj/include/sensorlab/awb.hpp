#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sensorlab/error.hpp"
#include "sensorlab/metrics.hpp"
#include "sensorlab/netcore.hpp"
#include "sensorlab/parallel.hpp"
#include "sensorlab/trainers.hpp"

namespace sensorlab {

// ---------------------------------------------------------------------------
// Quantities and step schedules

enum class Quantity { iw, b1, b2, lw };

inline constexpr std::array<Quantity, 4> all_quantities{Quantity::iw, Quantity::b1, Quantity::b2, Quantity::lw};

inline const char* to_string(Quantity q) noexcept {
    switch (q) {
    case Quantity::iw: return "IW";
    case Quantity::b1: return "B1";
    case Quantity::b2: return "B2";
    case Quantity::lw: return "LW";
    }
    return "?";
}

inline Quantity parse_quantity(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    for (Quantity q : all_quantities) {
        if (s == to_string(q)) {
            return q;
        }
    }
    throw ConfigError("unknown quantity '" + s + "' (expected IW, B1, B2 or LW)");
}

inline double coefficient(const WeightConfig& cfg, Quantity q) noexcept {
    switch (q) {
    case Quantity::iw: return cfg.iw;
    case Quantity::b1: return cfg.b1;
    case Quantity::b2: return cfg.b2;
    case Quantity::lw: return cfg.lw;
    }
    return 0.0;
}

inline WeightConfig with_coefficient(WeightConfig cfg, Quantity q, double value) noexcept {
    switch (q) {
    case Quantity::iw: cfg.iw = value; break;
    case Quantity::b1: cfg.b1 = value; break;
    case Quantity::b2: cfg.b2 = value; break;
    case Quantity::lw: cfg.lw = value; break;
    }
    return cfg;
}

/// Grid steps of the three refinement iterations.
struct StepSchedule {
    double s1 = 0.1;
    double s2 = 0.01;
    double s3 = 0.0001;

    bool operator==(const StepSchedule&) const = default;
};

inline constexpr StepSchedule lm_schedule{0.1, 0.01, 0.0001};
inline constexpr StepSchedule br_schedule{0.5, 0.05, 0.005};

inline constexpr StepSchedule schedule_for(TrainerKind kind) noexcept {
    return kind == TrainerKind::lm ? lm_schedule : br_schedule;
}

// ---------------------------------------------------------------------------
// Coefficient lattice
//
// Every grid value is an integer number of 1e-4 ticks, converted by a single
// division. The same coefficient therefore always has the same bit pattern no
// matter which iteration produced it, which keeps cache keys exact.

inline constexpr long long ticks_per_unit = 10000;
inline constexpr long long coefficient_limit_ticks = 5 * ticks_per_unit;

inline long long to_ticks(double value) noexcept { return std::llround(value * static_cast<double>(ticks_per_unit)); }

inline double from_ticks(long long ticks) noexcept {
    return static_cast<double>(ticks) / static_cast<double>(ticks_per_unit);
}

struct GridSpace {
    long long lo = 0;
    long long hi = 0;
    long long step = 1;

    [[nodiscard]] std::size_t size() const noexcept { return hi < lo ? 0 : static_cast<std::size_t>((hi - lo) / step + 1); }

    [[nodiscard]] std::vector<double> values() const {
        std::vector<double> out;
        out.reserve(size());
        for (long long t = lo; t <= hi; t += step) {
            out.push_back(from_ticks(t));
        }
        return out;
    }

    [[nodiscard]] bool contains(double c) const noexcept {
        const double lo_v = from_ticks(lo);
        const double hi_v = from_ticks(hi);
        return c >= lo_v && c <= hi_v;
    }
};

inline GridSpace make_space(long long lo, long long hi, double step) {
    const long long step_ticks = to_ticks(step);
    if (step_ticks <= 0) {
        throw ConfigError("AWB step " + std::to_string(step) + " is finer than the 1e-4 coefficient lattice");
    }
    lo = std::clamp(lo, -coefficient_limit_ticks, coefficient_limit_ticks);
    hi = std::clamp(hi, -coefficient_limit_ticks, coefficient_limit_ticks);
    return {lo, hi, step_ticks};
}

inline GridSpace iteration1_space(const StepSchedule& s) {
    return make_space(-coefficient_limit_ticks, coefficient_limit_ticks, s.s1);
}

/// The half-range containing c1: [0, 2.5], [-2.5, 0], [2.5, 5] or [-5, -2.5].
inline GridSpace iteration2_primary_space(double c1, const StepSchedule& s) {
    const long long half = coefficient_limit_ticks / 2;
    if (c1 >= 0.0 && c1 <= 2.5) {
        return make_space(0, half, s.s2);
    }
    if (c1 < 0.0 && c1 >= -2.5) {
        return make_space(-half, 0, s.s2);
    }
    if (c1 > 2.5) {
        return make_space(half, coefficient_limit_ticks, s.s2);
    }
    return make_space(-coefficient_limit_ticks, -half, s.s2);
}

/// Adaptive space used when the primary half-range brings no improvement:
/// [-c1 + 0.1, c1 + 0.1] for c1 > 0, [c1 - 0.1, -c1 - 0.1] for c1 < 0,
/// [-0.5, 0.5] for c1 = 0. Clamped to [-5, 5].
inline GridSpace iteration2_fallback_space(double c1, const StepSchedule& s) {
    const long long c = to_ticks(c1);
    const long long offset = ticks_per_unit / 10;
    if (c > 0) {
        return make_space(-c + offset, c + offset, s.s2);
    }
    if (c < 0) {
        return make_space(c - offset, -c - offset, s.s2);
    }
    return make_space(-ticks_per_unit / 2, ticks_per_unit / 2, s.s2);
}

/// [c2 - 0.01, c2 + 0.01], clamped to [-5, 5].
inline GridSpace iteration3_space(double c2, const StepSchedule& s) {
    const long long c = to_ticks(c2);
    const long long half_width = ticks_per_unit / 100;
    return make_space(c - half_width, c + half_width, s.s3);
}

// ---------------------------------------------------------------------------
// Index picking

enum class PickCriterion { none, perf, range, count_percent, rsq };

inline const char* to_string(PickCriterion c) noexcept {
    switch (c) {
    case PickCriterion::none: return "none";
    case PickCriterion::perf: return "perf";
    case PickCriterion::range: return "range";
    case PickCriterion::count_percent: return "countPercent";
    case PickCriterion::rsq: return "rsq";
    }
    return "?";
}

struct PickResult {
    std::optional<std::size_t> index; // empty = no improvement
    PickCriterion criterion = PickCriterion::none;

    bool operator==(const PickResult&) const = default;
};

/// Chooses a grid index by the cascade perf -> range -> countPercent -> rsq.
///
/// A criterion fires only if its best value strictly beats the baseline;
/// otherwise the next one is tried. Within a criterion the first (smallest
/// coefficient) optimum wins. Entries marked in `excluded` are skipped.
inline PickResult pick_index(std::span<const Metrics> sweep, const Metrics& baseline, std::span<const bool> excluded = {}) {
    const auto skip = [&](std::size_t i) { return !excluded.empty() && excluded[i]; };

    const auto best_by = [&](auto key, bool minimize) -> std::optional<std::size_t> {
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < sweep.size(); ++i) {
            if (skip(i)) {
                continue;
            }
            if (!best || (minimize ? key(sweep[i]) < key(sweep[*best]) : key(sweep[i]) > key(sweep[*best]))) {
                best = i;
            }
        }
        return best;
    };

    if (auto i = best_by([](const Metrics& m) { return m.perf; }, true); i && sweep[*i].perf < baseline.perf) {
        return {i, PickCriterion::perf};
    }
    if (auto i = best_by([](const Metrics& m) { return m.range; }, true); i && sweep[*i].range < baseline.range) {
        return {i, PickCriterion::range};
    }
    if (auto i = best_by([](const Metrics& m) { return m.count_percent; }, false);
        i && sweep[*i].count_percent > baseline.count_percent) {
        return {i, PickCriterion::count_percent};
    }
    if (auto i = best_by([](const Metrics& m) { return m.rsq; }, false); i && sweep[*i].rsq > baseline.rsq) {
        return {i, PickCriterion::rsq};
    }
    return {};
}

// Slack on range, countPercent and rsq in the final acceptance check.
inline constexpr double acceptance_tolerance = 1e-9;

/// Adapted metrics are kept only if perf does not rise and no other
/// parameter gets worse by more than acceptance_tolerance.
inline bool non_degrading(const Metrics& adapted, const Metrics& original) noexcept {
    return adapted.perf <= original.perf && adapted.range <= original.range + acceptance_tolerance &&
           adapted.count_percent >= original.count_percent - acceptance_tolerance &&
           adapted.rsq >= original.rsq - acceptance_tolerance;
}

// ---------------------------------------------------------------------------
// Traces

struct PointRecord {
    double coefficient = 0.0;
    std::optional<Metrics> metrics; // empty when training failed
    std::string failure;
};

struct SpaceTrace {
    double lo = 0.0;
    double hi = 0.0;
    double step = 0.0;
    std::vector<PointRecord> points;
    PickResult pick;
};

struct IterationTrace {
    int iteration = 0;
    // One space, or the primary followed by the adaptive fallback.
    std::vector<SpaceTrace> spaces;
    bool fallback_taken = false;
    double chosen = 0.0;
    Metrics chosen_metrics;
    // False when nothing beat the incoming coefficient and it was carried over.
    bool improved = false;
};

struct AwbTrace {
    Quantity quantity = Quantity::iw;
    std::array<IterationTrace, 3> iterations;
    double original_coefficient = 0.0;
    double adapted_coefficient = 0.0;
    double final_coefficient = 0.0;
    bool accepted = false;
    Metrics original;
    Metrics adapted;
};

struct AwbResult {
    WeightConfig initial_config;
    WeightConfig config;
    Metrics initial;
    Metrics final_metrics;
    std::vector<AwbTrace> traces;
};

// ---------------------------------------------------------------------------
// Search

/// Adaptive weights-and-biases coefficient search for a network of fixed size.
///
/// `Evaluator` is callable as evaluate(n, cfg) -> Metrics and may throw
/// NumericError for a failed training. Every configuration is evaluated at
/// most once; repeats are served from the cache.
template <class Evaluator>
class AwbSearch {
public:
    AwbSearch(Evaluator evaluate, int neurons, StepSchedule schedule, WeightConfig start, int jobs = 1)
        : evaluate_(std::move(evaluate)), neurons_(neurons), schedule_(schedule), config_(start), jobs_(jobs) {
        config_.validate();
        const auto m = evaluate_configs({config_});
        if (!m.front()) {
            throw NumericError("baseline training failed: " + cache_.at(key(config_)).failure);
        }
        baseline_ = *m.front();
    }

    [[nodiscard]] const WeightConfig& config() const noexcept { return config_; }
    [[nodiscard]] const Metrics& baseline() const noexcept { return baseline_; }
    [[nodiscard]] const StepSchedule& schedule() const noexcept { return schedule_; }
    [[nodiscard]] int neurons() const noexcept { return neurons_; }
    // Trainings actually run (cache misses).
    [[nodiscard]] std::size_t evaluations() const noexcept { return evaluations_; }

    /// Cached or fresh metrics of a configuration.
    std::optional<Metrics> metrics_of(const WeightConfig& cfg) { return evaluate_configs({cfg}).front(); }

    IterationTrace iteration1(Quantity q) {
        return run_iteration(1, q, {iteration1_space(schedule_)}, coefficient(config_, q), baseline_, false);
    }

    IterationTrace iteration2(Quantity q, double c1, const Metrics& m1) {
        return run_iteration(2, q, {iteration2_primary_space(c1, schedule_), iteration2_fallback_space(c1, schedule_)},
                             c1, m1, true);
    }

    IterationTrace iteration3(Quantity q, double c2, const Metrics& m2) {
        return run_iteration(3, q, {iteration3_space(c2, schedule_)}, c2, m2, false);
    }

    /// Three refinement passes on one coefficient, then the acceptance check.
    /// On acceptance the search's configuration and baseline move to the
    /// adapted value.
    AwbTrace tune_quantity(Quantity q) {
        AwbTrace trace;
        trace.quantity = q;
        trace.original_coefficient = coefficient(config_, q);
        trace.original = baseline_;

        trace.iterations[0] = iteration1(q);
        const auto& it1 = trace.iterations[0];
        trace.iterations[1] = iteration2(q, it1.chosen, it1.chosen_metrics);
        const auto& it2 = trace.iterations[1];
        trace.iterations[2] = iteration3(q, it2.chosen, it2.chosen_metrics);
        const auto& it3 = trace.iterations[2];

        trace.adapted_coefficient = it3.chosen;
        trace.adapted = it3.chosen_metrics;
        trace.accepted = it3.chosen != trace.original_coefficient && non_degrading(it3.chosen_metrics, trace.original);
        if (trace.accepted) {
            config_ = with_coefficient(config_, q, it3.chosen);
            baseline_ = it3.chosen_metrics;
        }
        trace.final_coefficient = coefficient(config_, q);
        return trace;
    }

    /// Tunes each quantity in turn against the running configuration.
    AwbResult tune_all(std::span<const Quantity> quantities = all_quantities) {
        AwbResult result;
        result.initial_config = config_;
        result.initial = baseline_;
        for (Quantity q : quantities) {
            result.traces.push_back(tune_quantity(q));
        }
        result.config = config_;
        result.final_metrics = baseline_;
        return result;
    }

private:
    using Key = std::array<double, 4>;

    struct Entry {
        std::optional<Metrics> metrics;
        std::string failure;
    };

    static Key key(const WeightConfig& c) noexcept { return {c.iw, c.b1, c.b2, c.lw}; }

    std::vector<std::optional<Metrics>> evaluate_configs(const std::vector<WeightConfig>& configs) {
        std::vector<WeightConfig> fresh;
        std::map<Key, bool> queued;
        for (const auto& c : configs) {
            const Key k = key(c);
            if (!cache_.contains(k) && !queued.contains(k)) {
                queued.emplace(k, true);
                fresh.push_back(c);
            }
        }
        std::vector<Entry> computed(fresh.size());
        parallel_for(fresh.size(), jobs_, [&](std::size_t i) {
            try {
                computed[i].metrics = evaluate_(neurons_, fresh[i]);
            } catch (const NumericError& err) {
                computed[i].failure = err.what();
            }
        });
        for (std::size_t i = 0; i < fresh.size(); ++i) {
            cache_.emplace(key(fresh[i]), std::move(computed[i]));
        }
        evaluations_ += fresh.size();

        std::vector<std::optional<Metrics>> out;
        out.reserve(configs.size());
        for (const auto& c : configs) {
            out.push_back(cache_.at(key(c)).metrics);
        }
        return out;
    }

    SpaceTrace sweep_space(Quantity q, const GridSpace& space, const Metrics& reference) {
        SpaceTrace st;
        st.lo = from_ticks(space.lo);
        st.hi = from_ticks(space.hi);
        st.step = from_ticks(space.step);
        const auto values = space.values();
        std::vector<WeightConfig> configs;
        configs.reserve(values.size());
        for (double v : values) {
            configs.push_back(with_coefficient(config_, q, v));
        }
        const auto results = evaluate_configs(configs);

        std::vector<Metrics> metrics(values.size());
        // std::vector<bool> has no contiguous storage to span over.
        const auto excluded = std::make_unique<bool[]>(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            PointRecord p;
            p.coefficient = values[i];
            p.metrics = results[i];
            if (results[i]) {
                metrics[i] = *results[i];
            } else {
                excluded[i] = true;
                p.failure = cache_.at(key(configs[i])).failure;
            }
            st.points.push_back(std::move(p));
        }
        st.pick = pick_index(metrics, reference, std::span<const bool>(excluded.get(), values.size()));
        return st;
    }

    // Sweeps the first space; if nothing improves on `incoming` and a second
    // (fallback) space is supplied, sweeps that too.
    IterationTrace run_iteration(int number, Quantity q, std::vector<GridSpace> spaces, double incoming,
                                 const Metrics& incoming_metrics, bool adaptive) {
        IterationTrace it;
        it.iteration = number;
        it.chosen = incoming;
        it.chosen_metrics = incoming_metrics;
        for (std::size_t s = 0; s < spaces.size(); ++s) {
            if (s > 0) {
                if (!adaptive) {
                    break;
                }
                it.fallback_taken = true;
            }
            SpaceTrace st = sweep_space(q, spaces[s], incoming_metrics);
            const auto pick = st.pick;
            it.spaces.push_back(std::move(st));
            if (pick.index) {
                const auto& point = it.spaces.back().points[*pick.index];
                it.chosen = point.coefficient;
                it.chosen_metrics = *point.metrics;
                it.improved = true;
                break;
            }
        }
        return it;
    }

    Evaluator evaluate_;
    int neurons_;
    StepSchedule schedule_;
    WeightConfig config_;
    int jobs_;
    Metrics baseline_;
    std::map<Key, Entry> cache_;
    std::size_t evaluations_ = 0;
};

template <class Evaluator>
AwbSearch(Evaluator, int, StepSchedule, WeightConfig, int) -> AwbSearch<Evaluator>;

} // namespace sensorlab
