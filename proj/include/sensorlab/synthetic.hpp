#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

#include "sensorlab/dataset.hpp"
#include "sensorlab/error.hpp"

namespace sensorlab {

/// Parameters for the synthetic diesel-engine oil-pressure generator.
struct EngineGenSpec {
    Index n = 2000;
    std::uint64_t seed = 7;
    double noise_sd = 0.5; // kPa

    double rpm_min = 650.0;
    double rpm_max = 2500.0;
    double load_min = 0.0;
    double load_max = 100.0;
    double oil_temp_min = 60.0;
    double oil_temp_max = 110.0;

    void validate() const {
        if (n < 5) {
            throw ConfigError("synthetic dataset needs n >= 5");
        }
        if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
            throw ConfigError("noise_sd must be a finite value >= 0");
        }
    }

    bool operator==(const EngineGenSpec&) const = default;
};

/// Noise-free oil pressure in kPa. Increasing in rpm over [650, 2500]
/// (the quadratic peaks near 3333 rpm).
inline double engine_oil_pressure(double rpm, double load_pct, double oil_temp_c) noexcept {
    return 120.0 + 0.10 * rpm - 1.5e-5 * rpm * rpm + 0.8 * load_pct - 0.6 * (oil_temp_c - 90.0);
}

// The stream is std::mt19937_64 (output fully fixed by the standard). Uniforms
// take the top 53 bits; normals come from Box-Muller on two uniforms. Library
// distributions are avoided because their algorithms vary between vendors.
class EngineRng {
public:
    explicit EngineRng(std::uint64_t seed) : engine_(seed) {}

    // [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
};

/// Columns: engine_speed_rpm, load_pct, oil_temp_C -> oil_pressure_kPa.
/// Each row draws rpm, load, temperature, then one normal for noise.
inline Dataset generate_engine_dataset(const EngineGenSpec& spec) {
    spec.validate();
    EngineRng rng(spec.seed);
    Dataset data;
    data.input_names = {"engine_speed_rpm", "load_pct", "oil_temp_C"};
    data.target_name = "oil_pressure_kPa";
    data.inputs.resize(spec.n, 3);
    data.targets.resize(spec.n);
    for (Index i = 0; i < spec.n; ++i) {
        const double rpm = rng.uniform(spec.rpm_min, spec.rpm_max);
        const double load = rng.uniform(spec.load_min, spec.load_max);
        const double temp = rng.uniform(spec.oil_temp_min, spec.oil_temp_max);
        const double noise = rng.normal();
        data.inputs(i, 0) = rpm;
        data.inputs(i, 1) = load;
        data.inputs(i, 2) = temp;
        data.targets(i) = engine_oil_pressure(rpm, load, temp) + spec.noise_sd * noise;
    }
    return data;
}

} // namespace sensorlab
