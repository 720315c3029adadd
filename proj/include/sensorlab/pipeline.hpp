#pragma once

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <tuple>
#include <string>
#include <vector>

#include "sensorlab/awb.hpp"
#include "sensorlab/dataset.hpp"
#include "sensorlab/error.hpp"
#include "sensorlab/metrics.hpp"
#include "sensorlab/netcore.hpp"
#include "sensorlab/neuron_search.hpp"
#include "sensorlab/parallel.hpp"
#include "sensorlab/report.hpp"
#include "sensorlab/synthetic.hpp"
#include "sensorlab/trainers.hpp"

namespace sensorlab {

enum class Profile { full, quick };

/// Everything a pipeline run needs. Built from JSON by parse_run_config.
struct RunConfig {
    std::optional<std::string> data_path;
    std::optional<EngineGenSpec> synthetic;
    std::string target_column = "oil_pressure_kPa";
    TrainerKind trainer = TrainerKind::lm;
    Profile profile = Profile::full;
    NeuronRange neurons;
    TrainOptions train;
    bool awb_enabled = true;
    std::vector<Quantity> awb_quantities{all_quantities.begin(), all_quantities.end()};
    StepSchedule awb_schedule = lm_schedule;
    // Fixed architecture; when both are set the neuron search is skipped.
    std::optional<int> set;
    std::optional<int> hidden;
    std::string output_dir = "sensorlab-out";
    int jobs = default_jobs();
};

namespace detail {

inline void reject_unknown(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) {
        throw ConfigError(where + " must be a JSON object");
    }
    for (const auto& [k, v] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            ok = ok || k == a;
        }
        if (!ok) {
            throw ConfigError("unknown config key '" + (where.empty() ? k : where + "." + k) + "'");
        }
    }
}

template <class T>
T get_as(const Json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

} // namespace detail

/// Resolves a JSON run configuration.
///
/// Defaults come first, then the profile ("quick" = 50 epochs, neurons 2-12,
/// AWB on the coarse 0.5/0.05/0.005 schedule), then explicit keys. Unknown
/// keys anywhere are rejected.
inline RunConfig parse_run_config(const Json& j) {
    using detail::get_as;
    detail::reject_unknown(j,
                           {"data", "synthetic", "target_column", "trainer", "profile", "neurons", "train", "awb", "set",
                            "hidden", "output_dir", "jobs"},
                           "");
    RunConfig cfg;
    if (j.contains("trainer")) {
        cfg.trainer = parse_trainer(get_as<std::string>(j["trainer"], "trainer"));
    }
    cfg.awb_schedule = schedule_for(cfg.trainer);
    if (j.contains("profile")) {
        const auto p = get_as<std::string>(j["profile"], "profile");
        if (p == "quick") {
            cfg.profile = Profile::quick;
        } else if (p != "full") {
            throw ConfigError("profile must be 'full' or 'quick', got '" + p + "'");
        }
    }
    if (cfg.profile == Profile::quick) {
        cfg.train.max_epochs = 50;
        cfg.neurons = {2, 12};
        cfg.awb_schedule = br_schedule;
    }

    if (j.contains("data")) {
        cfg.data_path = get_as<std::string>(j["data"], "data");
    }
    if (j.contains("synthetic")) {
        const auto& s = j["synthetic"];
        detail::reject_unknown(s, {"n", "seed", "noise_sd"}, "synthetic");
        EngineGenSpec spec;
        if (s.contains("n")) {
            spec.n = get_as<Index>(s["n"], "synthetic.n");
        }
        if (s.contains("seed")) {
            spec.seed = get_as<std::uint64_t>(s["seed"], "synthetic.seed");
        }
        if (s.contains("noise_sd")) {
            spec.noise_sd = get_as<double>(s["noise_sd"], "synthetic.noise_sd");
        }
        spec.validate();
        cfg.synthetic = spec;
    }
    if (cfg.data_path.has_value() == cfg.synthetic.has_value()) {
        throw ConfigError("exactly one of 'data' or 'synthetic' must be given");
    }
    if (j.contains("target_column")) {
        cfg.target_column = get_as<std::string>(j["target_column"], "target_column");
    }
    if (j.contains("neurons")) {
        const auto& n = j["neurons"];
        detail::reject_unknown(n, {"min", "max"}, "neurons");
        if (n.contains("min")) {
            cfg.neurons.min = get_as<int>(n["min"], "neurons.min");
        }
        if (n.contains("max")) {
            cfg.neurons.max = get_as<int>(n["max"], "neurons.max");
        }
    }
    cfg.neurons.validate();
    if (j.contains("train")) {
        const auto& t = j["train"];
        detail::reject_unknown(t, {"max_epochs", "mu0", "mu_inc", "mu_dec", "mu_max", "max_fail", "min_grad"}, "train");
        auto& o = cfg.train;
        if (t.contains("max_epochs")) o.max_epochs = get_as<int>(t["max_epochs"], "train.max_epochs");
        if (t.contains("mu0")) o.mu0 = get_as<double>(t["mu0"], "train.mu0");
        if (t.contains("mu_inc")) o.mu_inc = get_as<double>(t["mu_inc"], "train.mu_inc");
        if (t.contains("mu_dec")) o.mu_dec = get_as<double>(t["mu_dec"], "train.mu_dec");
        if (t.contains("mu_max")) o.mu_max = get_as<double>(t["mu_max"], "train.mu_max");
        if (t.contains("max_fail")) o.max_fail = get_as<int>(t["max_fail"], "train.max_fail");
        if (t.contains("min_grad")) o.min_grad = get_as<double>(t["min_grad"], "train.min_grad");
    }
    cfg.train.validate();
    if (j.contains("awb")) {
        const auto& a = j["awb"];
        detail::reject_unknown(a, {"enabled", "quantities", "schedule"}, "awb");
        if (a.contains("enabled")) {
            cfg.awb_enabled = get_as<bool>(a["enabled"], "awb.enabled");
        }
        if (a.contains("quantities")) {
            cfg.awb_quantities.clear();
            for (const auto& q : get_as<std::vector<std::string>>(a["quantities"], "awb.quantities")) {
                cfg.awb_quantities.push_back(parse_quantity(q));
            }
            if (cfg.awb_quantities.empty()) {
                throw ConfigError("awb.quantities must name at least one quantity");
            }
        }
        if (a.contains("schedule")) {
            cfg.awb_schedule = schedule_for(parse_trainer(get_as<std::string>(a["schedule"], "awb.schedule")));
        }
    }
    if (j.contains("set")) {
        cfg.set = get_as<int>(j["set"], "set");
        (void)weight_config(SetId{*cfg.set});
    }
    if (j.contains("hidden")) {
        cfg.hidden = get_as<int>(j["hidden"], "hidden");
        if (*cfg.hidden < 1) {
            throw ConfigError("hidden must be >= 1");
        }
    }
    if (j.contains("output_dir")) {
        cfg.output_dir = get_as<std::string>(j["output_dir"], "output_dir");
    }
    if (j.contains("jobs")) {
        cfg.jobs = get_as<int>(j["jobs"], "jobs");
        if (cfg.jobs < 1) {
            throw ConfigError("jobs must be >= 1");
        }
    }
    return cfg;
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path + ": cannot open config file");
    }
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Stages

struct PreparedData {
    Dataset raw;
    Scaler scaler;
    Dataset scaled;
    SplitIndices split;
};

inline PreparedData prepare_data(const RunConfig& cfg) {
    PreparedData p;
    if (cfg.synthetic) {
        p.raw = generate_engine_dataset(*cfg.synthetic);
        if (cfg.target_column != p.raw.target_name) {
            throw ConfigError("synthetic data has target '" + p.raw.target_name + "', config asks for '" +
                              cfg.target_column + "'");
        }
    } else {
        p.raw = load_csv(*cfg.data_path, cfg.target_column);
    }
    std::tie(p.scaler, p.scaled) = fit_apply_scaler(p.raw);
    p.split = interleaved_split(p.raw.size());
    return p;
}

inline NetworkEvaluator make_evaluator(const PreparedData& data, const RunConfig& cfg) {
    return NetworkEvaluator{&data.scaled, &data.split, cfg.trainer, cfg.train};
}

enum class PipelineMode {
    search,    // neuron search only
    train,     // one training at a fixed or searched architecture, no AWB
    awb,       // search if needed, then AWB regardless of awb.enabled
    full,      // search, train, AWB when enabled
};

struct PipelineResult {
    std::optional<SearchOutcome> search;
    SetId set;
    int hidden = 0;
    WeightConfig initial_cfg;
    WeightConfig final_cfg;
    Metrics initial;
    Metrics final_metrics;
    std::optional<AwbResult> awb;
    std::optional<TrainedModel> model;
};

namespace detail {

inline std::ofstream open_artifact(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError(path.string() + ": cannot open for writing");
    }
    return out;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
    auto out = open_artifact(path);
    out << j.dump(2) << '\n';
}

inline std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

} // namespace detail

/// Runs the requested stages and writes their artifacts into cfg.output_dir:
/// sweep.csv and selection.json (search), model.json, metrics.json,
/// predictions.csv and history.csv (training), awb_trace.json and
/// awb_trace.csv (AWB). Wall-clock timestamps go to run.log only, so every
/// other artifact depends on the configuration alone.
inline PipelineResult run_pipeline(const RunConfig& cfg, PipelineMode mode = PipelineMode::full,
                                   std::ostream* progress = nullptr) {
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw DataError(cfg.output_dir + ": cannot create output directory: " + ec.message());
    }
    auto log = detail::open_artifact(dir / "run.log");
    const auto note = [&](const std::string& line) {
        log << line << '\n';
        log.flush();
        if (progress != nullptr) {
            *progress << line << std::endl;
        }
    };
    note("started " + detail::timestamp());

    const PreparedData data = prepare_data(cfg);
    const NetworkEvaluator evaluate = make_evaluator(data, cfg);
    note("data: " + std::to_string(data.raw.size()) + " samples, " + std::to_string(data.raw.dims()) + " inputs, target " +
         data.raw.target_name);

    PipelineResult result;
    const bool fixed = cfg.set.has_value() && cfg.hidden.has_value();
    if (mode == PipelineMode::search || !fixed) {
        note("neuron search: sets 1-6, n " + std::to_string(cfg.neurons.min) + ".." + std::to_string(cfg.neurons.max) +
             ", trainer " + to_string(cfg.trainer));
        result.search = neuron_search(evaluate, cfg.neurons, cfg.jobs);
        {
            auto out = detail::open_artifact(dir / "sweep.csv");
            write_sweep_csv(out, result.search->table);
        }
        detail::write_json(dir / "selection.json", to_json(*result.search));
        result.set = result.search->selection.set;
        result.hidden = result.search->selection.n;
        note("selected set " + std::to_string(result.set.id) + " with " + std::to_string(result.hidden) + " neurons");
        if (mode == PipelineMode::search) {
            note("finished " + detail::timestamp());
            return result;
        }
    }
    if (fixed) {
        result.set = SetId{*cfg.set};
        result.hidden = *cfg.hidden;
    }

    result.initial_cfg = weight_config(result.set);
    result.final_cfg = result.initial_cfg;
    result.initial = evaluate(result.hidden, result.initial_cfg);
    note("initial: perf " + format_double(result.initial.perf) + ", countPercent " +
         format_double(result.initial.count_percent));

    const bool do_awb = mode == PipelineMode::awb || (mode == PipelineMode::full && cfg.awb_enabled);
    if (do_awb) {
        AwbSearch search(evaluate, result.hidden, cfg.awb_schedule, result.initial_cfg, cfg.jobs);
        result.awb = search.tune_all(cfg.awb_quantities);
        result.final_cfg = result.awb->config;
        for (const auto& t : result.awb->traces) {
            note(std::string("AWB ") + to_string(t.quantity) + ": " + format_double(t.original_coefficient) + " -> " +
                 format_double(t.final_coefficient) + (t.accepted ? " (accepted)" : " (kept)"));
        }
        detail::write_json(dir / "awb_trace.json", to_json(*result.awb));
        auto out = detail::open_artifact(dir / "awb_trace.csv");
        write_awb_csv(out, result.awb->traces);
    }

    result.model = evaluate.fit(result.hidden, result.final_cfg);
    result.final_metrics = evaluate.score(result.model->params);
    if (result.awb && !(result.final_metrics == result.awb->final_metrics)) {
        throw NumericError("retraining the final configuration did not reproduce its AWB metrics");
    }

    detail::write_json(dir / "model.json", to_json(SavedModel{result.final_cfg, result.model->params, data.scaler,
                                                               data.raw.target_name}));
    Json metrics;
    metrics["trainer"] = to_string(cfg.trainer);
    metrics["set"] = result.set.id;
    metrics["neurons"] = result.hidden;
    metrics["initialConfig"] = to_json(result.initial_cfg);
    metrics["finalConfig"] = to_json(result.final_cfg);
    metrics["initial"] = to_json(result.initial);
    metrics["final"] = to_json(result.final_metrics);
    metrics["stopReason"] = to_string(result.model->stop_reason);
    metrics["epochs"] = result.model->epochs_run;
    detail::write_json(dir / "metrics.json", metrics);
    {
        auto out = detail::open_artifact(dir / "predictions.csv");
        write_predictions_csv(out, data.raw.targets, predict(result.model->params, data.scaled.inputs));
    }
    {
        auto out = detail::open_artifact(dir / "history.csv");
        write_history_csv(out, *result.model);
    }
    note("final: perf " + format_double(result.final_metrics.perf) + ", countPercent " +
         format_double(result.final_metrics.count_percent) + ", range " + format_double(result.final_metrics.range) +
         ", rsq " + format_double(result.final_metrics.rsq));
    note("finished " + detail::timestamp());
    return result;
}

// index,subset
inline void write_split_csv(std::ostream& out, Index n) {
    const auto split = interleaved_split(n);
    std::vector<Subset> label(static_cast<std::size_t>(n));
    for (Index i : split.val) {
        label[static_cast<std::size_t>(i)] = Subset::val;
    }
    for (Index i : split.test) {
        label[static_cast<std::size_t>(i)] = Subset::test;
    }
    out << "index,subset\n";
    for (Index i = 0; i < n; ++i) {
        out << i << ',' << to_string(label[static_cast<std::size_t>(i)]) << '\n';
    }
}

} // namespace sensorlab
