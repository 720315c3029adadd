// sensorlab: command-line driver for the virtual-sensor modelling pipeline.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sensorlab/sensorlab.hpp"

namespace {

using sensorlab::ConfigError;
using sensorlab::Json;

// Flags shared by every pipeline subcommand; each one overrides the config
// key of the same meaning.
struct Overrides {
    std::string config_path;
    std::optional<std::string> data;
    std::optional<std::string> target;
    std::optional<long long> syn_n;
    std::optional<std::uint64_t> syn_seed;
    std::optional<double> syn_noise;
    std::optional<std::string> trainer;
    std::optional<std::string> profile;
    std::optional<int> neurons_min;
    std::optional<int> neurons_max;
    std::optional<int> max_epochs;
    std::optional<double> mu0;
    std::optional<double> mu_inc;
    std::optional<double> mu_dec;
    std::optional<double> mu_max;
    std::optional<int> max_fail;
    std::optional<double> min_grad;
    std::optional<std::string> quantities;
    std::optional<bool> awb;
    std::optional<std::string> awb_schedule;
    std::optional<int> set;
    std::optional<int> hidden;
    std::optional<std::string> out;
    std::optional<int> jobs;
    bool quiet = false;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", config_path, "JSON run configuration");
        app->add_option("--data", data, "input CSV (overrides 'data')");
        app->add_option("--target", target, "target column (overrides 'target_column')");
        app->add_option("--synthetic-n", syn_n, "synthetic sample count");
        app->add_option("--synthetic-seed", syn_seed, "synthetic generator seed");
        app->add_option("--synthetic-noise", syn_noise, "synthetic noise sd in kPa");
        app->add_option("--trainer", trainer, "LM or BR");
        app->add_option("--profile", profile, "full or quick");
        app->add_option("--neurons-min", neurons_min, "smallest hidden layer in the sweep");
        app->add_option("--neurons-max", neurons_max, "largest hidden layer in the sweep");
        app->add_option("--max-epochs", max_epochs);
        app->add_option("--mu0", mu0);
        app->add_option("--mu-inc", mu_inc);
        app->add_option("--mu-dec", mu_dec);
        app->add_option("--mu-max", mu_max);
        app->add_option("--max-fail", max_fail);
        app->add_option("--min-grad", min_grad);
        app->add_option("--quantities", quantities, "comma-separated subset of IW,B1,B2,LW");
        app->add_flag("--awb,!--no-awb", awb, "enable or disable AWB in 'run'");
        app->add_option("--awb-schedule", awb_schedule, "AWB step schedule: LM or BR");
        app->add_option("--set", set, "fixed weight/bias set 1..6 (with --hidden skips the search)");
        app->add_option("--hidden", hidden, "fixed hidden neuron count");
        app->add_option("-o,--out", out, "output directory");
        app->add_option("-j,--jobs", jobs, "concurrent trainings");
        app->add_flag("-q,--quiet", quiet, "no progress on stderr");
    }

    [[nodiscard]] Json merged() const {
        Json j = config_path.empty() ? Json::object() : sensorlab::read_json_file(config_path);
        if (!j.is_object()) {
            throw ConfigError(config_path + ": top level must be a JSON object");
        }
        if (data) {
            j.erase("synthetic");
            j["data"] = *data;
        }
        if (syn_n || syn_seed || syn_noise) {
            j.erase("data");
            Json& s = j["synthetic"];
            if (syn_n) s["n"] = *syn_n;
            if (syn_seed) s["seed"] = *syn_seed;
            if (syn_noise) s["noise_sd"] = *syn_noise;
        }
        if (target) j["target_column"] = *target;
        if (trainer) j["trainer"] = *trainer;
        if (profile) j["profile"] = *profile;
        if (neurons_min) j["neurons"]["min"] = *neurons_min;
        if (neurons_max) j["neurons"]["max"] = *neurons_max;
        if (max_epochs) j["train"]["max_epochs"] = *max_epochs;
        if (mu0) j["train"]["mu0"] = *mu0;
        if (mu_inc) j["train"]["mu_inc"] = *mu_inc;
        if (mu_dec) j["train"]["mu_dec"] = *mu_dec;
        if (mu_max) j["train"]["mu_max"] = *mu_max;
        if (max_fail) j["train"]["max_fail"] = *max_fail;
        if (min_grad) j["train"]["min_grad"] = *min_grad;
        if (quantities) {
            Json list = Json::array();
            std::stringstream ss(*quantities);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (!item.empty()) {
                    list.push_back(item);
                }
            }
            j["awb"]["quantities"] = std::move(list);
        }
        if (awb) j["awb"]["enabled"] = *awb;
        if (awb_schedule) j["awb"]["schedule"] = *awb_schedule;
        if (set) j["set"] = *set;
        if (hidden) j["hidden"] = *hidden;
        if (out) j["output_dir"] = *out;
        if (jobs) j["jobs"] = *jobs;
        return j;
    }
};

int fail(sensorlab::ErrorKind kind, std::string message) {
    for (char& c : message) {
        if (c == '\n' || c == '\r') {
            c = ' ';
        }
    }
    std::cerr << "sensorlab: error kind=" << sensorlab::to_string(kind) << " code=" << static_cast<int>(kind) << ": "
              << message << '\n';
    return static_cast<int>(kind);
}

void print_metrics(std::ostream& out, const char* label, const Json& m) {
    const double perf = m.at("perf").get<double>();
    out << std::setw(8) << label << "  perf " << perf << " (rmse " << std::sqrt(perf) << ")  countPercent "
        << m.at("countPercent").get<double>() << "  range " << m.at("range").get<double>() << "  rsq "
        << m.at("rsq").get<double>() << '\n';
}

int report(const std::string& dir, const std::string& data, const std::string& target) {
    namespace fs = std::filesystem;
    bool printed = false;
    if (!data.empty()) {
        const auto ds = sensorlab::load_csv(data, target);
        std::cout << "input ranking against " << ds.target_name << " (Pearson r):\n";
        for (const auto& r : sensorlab::rank_inputs(ds)) {
            std::cout << "  " << std::setw(24) << std::left << r.name << std::right << std::setw(12) << r.r
                      << (r.zero_variance ? "  (zero variance)" : "") << '\n';
        }
        printed = true;
    }
    if (!dir.empty()) {
        const fs::path root(dir);
        if (fs::exists(root / "selection.json")) {
            const Json sel = sensorlab::read_json_file((root / "selection.json").string());
            std::cout << "neuron search: set " << sel.at("set") << ", " << sel.at("neurons") << " neurons (perfCut "
                      << sel.at("perfCut") << ", countCut " << sel.at("countCut") << ")\n";
            for (const auto& s : sel.at("perSet")) {
                std::cout << "  set " << s.at("set") << ": n=" << s.at("n") << " perf " << s.at("perf") << " countPercent "
                          << s.at("countPercent") << '\n';
            }
            printed = true;
        }
        if (fs::exists(root / "metrics.json")) {
            const Json m = sensorlab::read_json_file((root / "metrics.json").string());
            std::cout << "trainer " << m.at("trainer").get<std::string>() << ", set " << m.at("set") << ", "
                      << m.at("neurons") << " neurons\n";
            print_metrics(std::cout, "initial", m.at("initial"));
            print_metrics(std::cout, "final", m.at("final"));
            printed = true;
        }
        if (fs::exists(root / "awb_trace.json")) {
            const Json t = sensorlab::read_json_file((root / "awb_trace.json").string());
            for (const auto& q : t.at("traces")) {
                std::cout << "  AWB " << q.at("quantity").get<std::string>() << ": " << q.at("originalCoefficient")
                          << " -> " << q.at("finalCoefficient") << (q.at("accepted").get<bool>() ? " (accepted)" : " (kept)")
                          << '\n';
            }
            printed = true;
        }
    }
    if (!printed) {
        throw ConfigError("report needs --dir with pipeline artifacts or --data");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sensorlab: virtual-sensor regression networks with AWB coefficient search"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "write a synthetic engine oil-pressure CSV");
    sensorlab::EngineGenSpec spec;
    std::string gen_out;
    long long gen_n = spec.n;
    gen->add_option("--n", gen_n, "sample count")->capture_default_str();
    gen->add_option("--seed", spec.seed, "generator seed")->capture_default_str();
    gen->add_option("--noise", spec.noise_sd, "noise sd in kPa")->capture_default_str();
    gen->add_option("-o,--out", gen_out, "output CSV")->required();

    auto* split = app.add_subcommand("split", "write the interleaved train/val/test assignment");
    long long split_n = 0;
    std::string split_data;
    std::string split_target = "oil_pressure_kPa";
    std::string split_out;
    split->add_option("--n", split_n, "sample count");
    split->add_option("--data", split_data, "CSV whose rows are divided");
    split->add_option("--target", split_target)->capture_default_str();
    split->add_option("-o,--out", split_out, "output CSV (default stdout)");

    Overrides train_o;
    Overrides search_o;
    Overrides awb_o;
    Overrides run_o;
    auto* train = app.add_subcommand("train", "train one network (search first unless --set and --hidden)");
    train_o.attach(train);
    auto* search = app.add_subcommand("neuron-search", "sweep sets 1-6 over the neuron range and select");
    search_o.attach(search);
    auto* awb = app.add_subcommand("awb", "tune weight/bias coefficients with AWB");
    awb_o.attach(awb);
    auto* run = app.add_subcommand("run", "full pipeline: search, train, AWB, report");
    run_o.attach(run);

    auto* rep = app.add_subcommand("report", "summarize a run directory and/or rank inputs of a CSV");
    std::string rep_dir;
    std::string rep_data;
    std::string rep_target = "oil_pressure_kPa";
    rep->add_option("--dir", rep_dir, "pipeline output directory");
    rep->add_option("--data", rep_data, "CSV to rank inputs of");
    rep->add_option("--target", rep_target)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        return fail(sensorlab::ErrorKind::config, e.what());
    }

    try {
        if (gen->parsed()) {
            spec.n = gen_n;
            sensorlab::save_csv(sensorlab::generate_engine_dataset(spec), gen_out);
            return 0;
        }
        if (split->parsed()) {
            long long n = split_n;
            if (!split_data.empty()) {
                n = sensorlab::load_csv(split_data, split_target).size();
            }
            if (split_out.empty()) {
                sensorlab::write_split_csv(std::cout, n);
            } else {
                std::ofstream out(split_out, std::ios::binary);
                if (!out) {
                    throw sensorlab::DataError(split_out + ": cannot open for writing");
                }
                sensorlab::write_split_csv(out, n);
            }
            return 0;
        }
        if (rep->parsed()) {
            return report(rep_dir, rep_data, rep_target);
        }

        struct Mode {
            CLI::App* app;
            Overrides* o;
            sensorlab::PipelineMode mode;
        };
        for (const Mode& m : {Mode{train, &train_o, sensorlab::PipelineMode::train},
                              Mode{search, &search_o, sensorlab::PipelineMode::search},
                              Mode{awb, &awb_o, sensorlab::PipelineMode::awb},
                              Mode{run, &run_o, sensorlab::PipelineMode::full}}) {
            if (m.app->parsed()) {
                const auto cfg = sensorlab::parse_run_config(m.o->merged());
                sensorlab::run_pipeline(cfg, m.mode, m.o->quiet ? nullptr : &std::clog);
                return 0;
            }
        }
    } catch (const sensorlab::Error& e) {
        return fail(e.kind(), e.what());
    } catch (const std::exception& e) {
        return fail(sensorlab::ErrorKind::data, e.what());
    }
    return 0;
}
