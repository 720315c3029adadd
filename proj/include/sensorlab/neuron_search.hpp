#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sensorlab/dataset.hpp"
#include "sensorlab/error.hpp"
#include "sensorlab/metrics.hpp"
#include "sensorlab/netcore.hpp"
#include "sensorlab/parallel.hpp"
#include "sensorlab/trainers.hpp"

namespace sensorlab {

struct NeuronRange {
    int min = 2;
    int max = 50;

    void validate() const {
        if (min < 1 || max < min) {
            throw ConfigError("neuron range must satisfy 1 <= min <= max (got " + std::to_string(min) + ".." +
                              std::to_string(max) + ")");
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(max - min + 1); }

    bool operator==(const NeuronRange&) const = default;
};

/// Trains one network and scores it on the full dataset.
///
/// Callable as evaluator(n, cfg) -> Metrics; training failures surface as
/// NumericError. Both the neuron sweep and AWB consume this shape, which lets
/// tests substitute a cheap surrogate.
struct NetworkEvaluator {
    const Dataset* scaled = nullptr;
    const SplitIndices* split = nullptr;
    TrainerKind kind = TrainerKind::lm;
    TrainOptions opts;

    [[nodiscard]] TrainedModel fit(int n, const WeightConfig& cfg) const {
        const MlpParams init = init_params(scaled->dims(), n, cfg);
        return train(kind, init, *scaled, *split, opts);
    }

    [[nodiscard]] Metrics score(const MlpParams& params) const {
        const Eigen::VectorXd pred = predict(params, scaled->inputs);
        return compute_metrics(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
                               std::span<const double>(scaled->targets.data(), static_cast<std::size_t>(scaled->size())));
    }

    Metrics operator()(int n, const WeightConfig& cfg) const { return score(fit(n, cfg).params); }
};

struct SweepRow {
    SetId set;
    int n = 0;
    Metrics metrics;
    bool flagged = false;
    std::string flag_reason;
};

using SweepTable = std::vector<SweepRow>;

/// Trains every (set, n) pair, rows ordered by set then n. A training failure
/// flags its row and the sweep carries on.
template <class Evaluator>
SweepTable sweep_sets(const Evaluator& evaluate, std::span<const SetId> sets, NeuronRange range, int jobs) {
    range.validate();
    const std::size_t per_set = range.size();
    SweepTable table(sets.size() * per_set);
    parallel_for(table.size(), jobs, [&](std::size_t i) {
        SweepRow& row = table[i];
        row.set = sets[i / per_set];
        row.n = range.min + static_cast<int>(i % per_set);
        try {
            row.metrics = evaluate(row.n, weight_config(row.set));
        } catch (const NumericError& err) {
            row.flagged = true;
            row.flag_reason = err.what();
        }
    });
    return table;
}

template <class Evaluator>
SweepTable sweep_set(const Evaluator& evaluate, SetId set, NeuronRange range = {}, int jobs = 1) {
    const SetId sets[] = {set};
    return sweep_sets(evaluate, sets, range, jobs);
}

inline std::vector<SetId> all_sets() {
    std::vector<SetId> out;
    for (int id = 1; id <= SetId::count; ++id) {
        out.push_back(SetId{id});
    }
    return out;
}

struct SetResult {
    SetId set;
    int best_n = 0;
    double perf = 0.0;
    double count_percent = 0.0;

    bool operator==(const SetResult&) const = default;
};

// Minimum countPercent gap (in points) that overrides the lowest-perf choice.
inline constexpr double count_override_gap = 2.0;

/// Picks the neuron count for one set: the lowest-perf row, unless the best
/// countPercent beats that row's countPercent by more than 2 points. Ties go
/// to the smaller n. Flagged rows are ignored.
inline SetResult choose_neurons_for_set(std::span<const SweepRow> rows) {
    const SweepRow* best_perf = nullptr;
    const SweepRow* best_count = nullptr;
    for (const auto& row : rows) {
        if (row.flagged) {
            continue;
        }
        const auto better_perf = [&] {
            return row.metrics.perf < best_perf->metrics.perf ||
                   (row.metrics.perf == best_perf->metrics.perf && row.n < best_perf->n);
        };
        const auto better_count = [&] {
            return row.metrics.count_percent > best_count->metrics.count_percent ||
                   (row.metrics.count_percent == best_count->metrics.count_percent && row.n < best_count->n);
        };
        if (best_perf == nullptr || better_perf()) {
            best_perf = &row;
        }
        if (best_count == nullptr || better_count()) {
            best_count = &row;
        }
    }
    if (best_perf == nullptr) {
        throw NumericError(rows.empty() ? "empty sweep table"
                                        : "every sweep row for set " + std::to_string(rows.front().set.id) + " failed");
    }
    const SweepRow* pick =
        best_count->metrics.count_percent - best_perf->metrics.count_percent > count_override_gap ? best_count : best_perf;
    return {pick->set, pick->n, pick->metrics.perf, pick->metrics.count_percent};
}

namespace detail {

inline double cut_statistic(std::span<const double> values) {
    if (values.empty()) {
        throw DataError("cut statistic needs at least one value");
    }
    const auto n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= n;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    const double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return 0.5 * (sd + (*hi + *lo - 2.0 * mean));
}

} // namespace detail

/// Mean of {sample std, max + min - 2*mean} over the six per-set perf values.
/// Can be negative.
inline double perf_cut(std::span<const double> perfs) { return detail::cut_statistic(perfs); }

/// Same statistic over the six per-set countPercent values.
inline double count_cut(std::span<const double> counts) { return detail::cut_statistic(counts); }

inline constexpr int neuron_cut = 5;

struct FinalSelection {
    SetId set;
    int n = 0;
    double perf_cut = 0.0;
    double count_cut = 0.0;
    // Sets inside both tolerance bands, before the neuron-count restriction.
    std::vector<SetId> candidates;
    bool neuron_cut_applied = false;
};

/// Compares the per-set optima.
///
/// Candidates lie within perfCut of the best perf and within countCut of the
/// best countPercent (negative cuts count as 0). Candidates with at most
/// min(n) + neuronCut neurons are preferred when any exist. The winner is the
/// lexicographic best of (perf asc, countPercent desc, n asc, set id asc);
/// with no candidates at all, the lowest perf wins.
inline FinalSelection select_final(std::span<const SetResult> results) {
    if (results.empty()) {
        throw NumericError("no valid set results to select from");
    }
    std::vector<double> pa;
    std::vector<double> ca;
    int min_n = std::numeric_limits<int>::max();
    for (const auto& r : results) {
        pa.push_back(r.perf);
        ca.push_back(r.count_percent);
        min_n = std::min(min_n, r.best_n);
    }
    FinalSelection sel;
    sel.perf_cut = perf_cut(pa);
    sel.count_cut = count_cut(ca);
    const double perf_limit = *std::min_element(pa.begin(), pa.end()) + std::max(sel.perf_cut, 0.0);
    const double count_limit = *std::max_element(ca.begin(), ca.end()) - std::max(sel.count_cut, 0.0);

    const auto better = [](const SetResult& a, const SetResult& b) {
        if (a.perf != b.perf) {
            return a.perf < b.perf;
        }
        if (a.count_percent != b.count_percent) {
            return a.count_percent > b.count_percent;
        }
        if (a.best_n != b.best_n) {
            return a.best_n < b.best_n;
        }
        return a.set.id < b.set.id;
    };

    std::vector<const SetResult*> pool;
    for (const auto& r : results) {
        if (r.perf <= perf_limit && r.count_percent >= count_limit) {
            pool.push_back(&r);
            sel.candidates.push_back(r.set);
        }
    }
    if (pool.empty()) {
        const SetResult* w = &results.front();
        for (const auto& r : results) {
            if (r.perf < w->perf || (r.perf == w->perf && better(r, *w))) {
                w = &r;
            }
        }
        sel.set = w->set;
        sel.n = w->best_n;
        return sel;
    }
    std::vector<const SetResult*> small;
    for (const auto* r : pool) {
        if (r->best_n <= min_n + neuron_cut) {
            small.push_back(r);
        }
    }
    if (!small.empty()) {
        sel.neuron_cut_applied = small.size() != pool.size();
        pool = std::move(small);
    }
    const SetResult* w = pool.front();
    for (const auto* r : pool) {
        if (better(*r, *w)) {
            w = r;
        }
    }
    sel.set = w->set;
    sel.n = w->best_n;
    return sel;
}

struct SearchOutcome {
    SweepTable table;
    std::vector<SetResult> per_set;
    FinalSelection selection;
};

/// Sweeps all six sets, reduces each to its optimum, then picks the winner.
template <class Evaluator>
SearchOutcome neuron_search(const Evaluator& evaluate, NeuronRange range, int jobs) {
    SearchOutcome out;
    const auto sets = all_sets();
    out.table = sweep_sets(evaluate, sets, range, jobs);
    const std::size_t per_set = range.size();
    for (std::size_t s = 0; s < sets.size(); ++s) {
        const std::span<const SweepRow> rows(out.table.data() + s * per_set, per_set);
        try {
            out.per_set.push_back(choose_neurons_for_set(rows));
        } catch (const NumericError&) {
            // every row of this set failed; it drops out of the comparison
        }
    }
    out.selection = select_final(out.per_set);
    return out;
}

// set,n,perf,countPercent,flags
inline void write_sweep_csv(std::ostream& out, const SweepTable& table) {
    out << "set,n,perf,countPercent,flags\n";
    for (const auto& row : table) {
        out << row.set.id << ',' << row.n << ',';
        if (row.flagged) {
            out << ",,failed";
        } else {
            out << format_double(row.metrics.perf) << ',' << format_double(row.metrics.count_percent) << ',';
        }
        out << '\n';
    }
}

} // namespace sensorlab
