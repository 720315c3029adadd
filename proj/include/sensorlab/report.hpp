#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sensorlab/awb.hpp"
#include "sensorlab/dataset.hpp"
#include "sensorlab/error.hpp"
#include "sensorlab/metrics.hpp"
#include "sensorlab/netcore.hpp"
#include "sensorlab/neuron_search.hpp"

namespace sensorlab {

using Json = nlohmann::ordered_json;

// JSON has no NaN; emit null instead.
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json to_json(const Metrics& m) {
    Json j;
    j["perf"] = number(m.perf);
    j["countPercent"] = number(m.count_percent);
    j["range"] = number(m.range);
    j["rsq"] = number(m.rsq);
    return j;
}

inline Metrics metrics_from_json(const Json& j) {
    Metrics m;
    m.perf = j.at("perf").get<double>();
    m.count_percent = j.at("countPercent").get<double>();
    m.range = j.at("range").get<double>();
    m.rsq = j.at("rsq").get<double>();
    return m;
}

inline Json to_json(const WeightConfig& c) {
    Json j;
    j["IW"] = c.iw;
    j["B1"] = c.b1;
    j["B2"] = c.b2;
    j["LW"] = c.lw;
    return j;
}

inline WeightConfig weight_config_from_json(const Json& j) {
    WeightConfig c;
    c.iw = j.at("IW").get<double>();
    c.b1 = j.at("B1").get<double>();
    c.b2 = j.at("B2").get<double>();
    c.lw = j.at("LW").get<double>();
    return c;
}

// {column: {min, max}} in column order.
inline Json to_json(const Scaler& s) {
    Json j = Json::object();
    for (std::size_t c = 0; c < s.names.size(); ++c) {
        const auto i = static_cast<Index>(c);
        j[s.names[c]] = Json{{"min", s.min(i)}, {"max", s.max(i)}};
    }
    return j;
}

inline Scaler scaler_from_json(const Json& j) {
    Scaler s;
    s.min.resize(static_cast<Index>(j.size()));
    s.max.resize(static_cast<Index>(j.size()));
    Index c = 0;
    for (const auto& [name, v] : j.items()) {
        s.names.push_back(name);
        s.min(c) = v.at("min").get<double>();
        s.max(c) = v.at("max").get<double>();
        ++c;
    }
    return s;
}

/// A trained network together with the scaling its inputs expect.
struct SavedModel {
    WeightConfig cfg;
    MlpParams params;
    Scaler scaler;
    std::string target_name;
};

inline Json to_json(const SavedModel& m) {
    const auto& p = m.params;
    Json j;
    j["d"] = p.inputs();
    j["h"] = p.hidden();
    j["cfg"] = to_json(m.cfg);
    Json iw = Json::array();
    for (Index r = 0; r < p.iw.rows(); ++r) {
        Json row = Json::array();
        for (Index c = 0; c < p.iw.cols(); ++c) {
            row.push_back(p.iw(r, c));
        }
        iw.push_back(std::move(row));
    }
    j["iw"] = std::move(iw);
    j["b1"] = std::vector<double>(p.b1.data(), p.b1.data() + p.b1.size());
    j["lw"] = std::vector<double>(p.lw.data(), p.lw.data() + p.lw.size());
    j["b2"] = p.b2;
    j["scaler"] = to_json(m.scaler);
    j["target"] = m.target_name;
    return j;
}

inline SavedModel model_from_json(const Json& j) {
    try {
        SavedModel m;
        const auto d = j.at("d").get<Index>();
        const auto h = j.at("h").get<Index>();
        m.cfg = weight_config_from_json(j.at("cfg"));
        m.params.iw.resize(h, d);
        const auto& iw = j.at("iw");
        if (static_cast<Index>(iw.size()) != h) {
            throw DataError("model iw has wrong row count");
        }
        for (Index r = 0; r < h; ++r) {
            const auto& row = iw.at(static_cast<std::size_t>(r));
            if (static_cast<Index>(row.size()) != d) {
                throw DataError("model iw has wrong column count");
            }
            for (Index c = 0; c < d; ++c) {
                m.params.iw(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
            }
        }
        const auto b1 = j.at("b1").get<std::vector<double>>();
        const auto lw = j.at("lw").get<std::vector<double>>();
        if (static_cast<Index>(b1.size()) != h || static_cast<Index>(lw.size()) != h) {
            throw DataError("model bias/layer weight length mismatch");
        }
        m.params.b1 = Eigen::Map<const Eigen::VectorXd>(b1.data(), h);
        m.params.lw = Eigen::Map<const Eigen::VectorXd>(lw.data(), h);
        m.params.b2 = j.at("b2").get<double>();
        m.scaler = scaler_from_json(j.at("scaler"));
        m.target_name = j.value("target", std::string{});
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model JSON: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Neuron search

inline Json to_json(const SearchOutcome& s) {
    Json j;
    j["set"] = s.selection.set.id;
    j["neurons"] = s.selection.n;
    j["perfCut"] = s.selection.perf_cut;
    j["countCut"] = s.selection.count_cut;
    j["neuronCut"] = neuron_cut;
    j["neuronCutApplied"] = s.selection.neuron_cut_applied;
    Json cands = Json::array();
    for (auto id : s.selection.candidates) {
        cands.push_back(id.id);
    }
    j["candidates"] = std::move(cands);
    Json sets = Json::array();
    for (const auto& r : s.per_set) {
        sets.push_back(Json{{"set", r.set.id}, {"n", r.best_n}, {"perf", r.perf}, {"countPercent", r.count_percent}});
    }
    j["perSet"] = std::move(sets);
    return j;
}

// ---------------------------------------------------------------------------
// AWB traces

inline Json to_json(const PointRecord& p) {
    Json j;
    j["coefficient"] = p.coefficient;
    if (p.metrics) {
        j["metrics"] = to_json(*p.metrics);
    } else {
        j["metrics"] = nullptr;
        j["failure"] = p.failure;
    }
    return j;
}

inline Json to_json(const AwbTrace& t) {
    Json j;
    j["quantity"] = to_string(t.quantity);
    j["originalCoefficient"] = t.original_coefficient;
    j["adaptedCoefficient"] = t.adapted_coefficient;
    j["finalCoefficient"] = t.final_coefficient;
    j["accepted"] = t.accepted;
    j["original"] = to_json(t.original);
    j["adapted"] = to_json(t.adapted);
    Json its = Json::array();
    for (const auto& it : t.iterations) {
        Json ji;
        ji["iteration"] = it.iteration;
        ji["fallbackTaken"] = it.fallback_taken;
        ji["improved"] = it.improved;
        ji["chosen"] = it.chosen;
        ji["chosenMetrics"] = to_json(it.chosen_metrics);
        Json spaces = Json::array();
        for (const auto& sp : it.spaces) {
            Json js;
            js["lo"] = sp.lo;
            js["hi"] = sp.hi;
            js["step"] = sp.step;
            js["chosenIndex"] = sp.pick.index ? Json(*sp.pick.index) : Json(nullptr);
            js["criterion"] = to_string(sp.pick.criterion);
            Json pts = Json::array();
            for (const auto& p : sp.points) {
                pts.push_back(to_json(p));
            }
            js["points"] = std::move(pts);
            spaces.push_back(std::move(js));
        }
        ji["spaces"] = std::move(spaces);
        its.push_back(std::move(ji));
    }
    j["iterations"] = std::move(its);
    return j;
}

inline Json to_json(const AwbResult& r) {
    Json j;
    j["initialConfig"] = to_json(r.initial_config);
    j["finalConfig"] = to_json(r.config);
    j["initial"] = to_json(r.initial);
    j["final"] = to_json(r.final_metrics);
    Json traces = Json::array();
    for (const auto& t : r.traces) {
        traces.push_back(to_json(t));
    }
    j["traces"] = std::move(traces);
    return j;
}

// quantity,iteration,space,coefficient,perf,range,countPercent,rsq
inline void write_awb_csv(std::ostream& out, const std::vector<AwbTrace>& traces) {
    out << "quantity,iteration,space,coefficient,perf,range,countPercent,rsq\n";
    for (const auto& t : traces) {
        for (const auto& it : t.iterations) {
            for (std::size_t s = 0; s < it.spaces.size(); ++s) {
                const char* space = s == 0 ? (it.iteration == 2 ? "primary" : "main") : "fallback";
                for (const auto& p : it.spaces[s].points) {
                    out << to_string(t.quantity) << ',' << it.iteration << ',' << space << ','
                        << format_double(p.coefficient);
                    if (p.metrics) {
                        out << ',' << format_double(p.metrics->perf) << ',' << format_double(p.metrics->range) << ','
                            << format_double(p.metrics->count_percent) << ',' << format_double(p.metrics->rsq);
                    } else {
                        out << ",,,,";
                    }
                    out << '\n';
                }
            }
        }
    }
}

// index,target,prediction,accuracy
inline void write_predictions_csv(std::ostream& out, const Eigen::VectorXd& targets, const Eigen::VectorXd& preds) {
    out << "index,target,prediction,accuracy\n";
    for (Index i = 0; i < targets.size(); ++i) {
        out << i << ',' << format_double(targets(i)) << ',' << format_double(preds(i)) << ','
            << format_double(point_accuracy(preds(i), targets(i))) << '\n';
    }
}

} // namespace sensorlab
