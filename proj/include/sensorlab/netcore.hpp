#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <string>

#include <Eigen/Core>

#include "sensorlab/error.hpp"

namespace sensorlab {

/// Coefficients that expand into the initial weight/bias matrices.
struct WeightConfig {
    double iw = 1.0;
    double b1 = 1.0;
    double b2 = 1.0;
    double lw = 1.0;

    static constexpr double max_magnitude = 5.0;

    void validate() const {
        for (double c : {iw, b1, b2, lw}) {
            if (!std::isfinite(c) || std::abs(c) > max_magnitude) {
                throw ConfigError("weight coefficient " + std::to_string(c) + " outside [-5, 5]");
            }
        }
    }

    auto operator<=>(const WeightConfig&) const = default;
};

/// One of the six hard-coded starting configurations, numbered 1..6.
struct SetId {
    int id = 1;

    static constexpr int count = 6;

    auto operator<=>(const SetId&) const = default;
};

// (IW, B1, B2, LW) for Sets 1..6.
inline constexpr std::array<WeightConfig, SetId::count> set_configs{{
    {1.0, 1.0, 1.0, 0.0},
    {1.0, 1.0, 1.0, 1.0},
    {1.0, 0.0, 0.0, 1.0},
    {1.0, 1.0, 0.0, 1.0},
    {1.0, 0.0, 1.0, 1.0},
    {0.0, 1.0, 1.0, 1.0},
}};

inline WeightConfig weight_config(SetId set) {
    if (set.id < 1 || set.id > SetId::count) {
        throw ConfigError("weight/bias set must be in 1..6, got " + std::to_string(set.id));
    }
    return set_configs[static_cast<std::size_t>(set.id - 1)];
}

/// Parameters of the d-input, h-neuron, single-output network
///     y = b2 + lw . tanh(iw x + b1)
///
/// The flattened parameter vector used by the trainers and the Jacobian is
/// ordered (iw row-major, b1, lw, b2), giving h*d + 2h + 1 entries.
struct MlpParams {
    Eigen::MatrixXd iw; // h x d
    Eigen::VectorXd b1; // h
    Eigen::VectorXd lw; // h
    double b2 = 0.0;

    [[nodiscard]] Eigen::Index inputs() const noexcept { return iw.cols(); }
    [[nodiscard]] Eigen::Index hidden() const noexcept { return iw.rows(); }
    [[nodiscard]] Eigen::Index parameter_count() const noexcept { return hidden() * inputs() + 2 * hidden() + 1; }

    [[nodiscard]] Eigen::VectorXd flatten() const {
        const Eigen::Index h = hidden();
        const Eigen::Index d = inputs();
        Eigen::VectorXd theta(parameter_count());
        Eigen::Index k = 0;
        for (Eigen::Index j = 0; j < h; ++j) {
            for (Eigen::Index i = 0; i < d; ++i) {
                theta(k++) = iw(j, i);
            }
        }
        theta.segment(k, h) = b1;
        k += h;
        theta.segment(k, h) = lw;
        k += h;
        theta(k) = b2;
        return theta;
    }

    static MlpParams unflatten(Eigen::Index d, Eigen::Index h, const Eigen::Ref<const Eigen::VectorXd>& theta) {
        if (theta.size() != h * d + 2 * h + 1) {
            throw NumericError("parameter vector length " + std::to_string(theta.size()) + " does not match d=" +
                               std::to_string(d) + ", h=" + std::to_string(h));
        }
        MlpParams p;
        p.iw.resize(h, d);
        Eigen::Index k = 0;
        for (Eigen::Index j = 0; j < h; ++j) {
            for (Eigen::Index i = 0; i < d; ++i) {
                p.iw(j, i) = theta(k++);
            }
        }
        p.b1 = theta.segment(k, h);
        k += h;
        p.lw = theta.segment(k, h);
        k += h;
        p.b2 = theta(k);
        return p;
    }

    [[nodiscard]] bool finite() const {
        return iw.allFinite() && b1.allFinite() && lw.allFinite() && std::isfinite(b2);
    }

    bool operator==(const MlpParams& o) const {
        return iw.rows() == o.iw.rows() && iw.cols() == o.iw.cols() && iw == o.iw && b1 == o.b1 && lw == o.lw &&
               b2 == o.b2;
    }
};

// Element k of every flattened matrix is scaled by (1 + k * symmetry_epsilon)
// so hidden units start distinguishable. Zero coefficients stay exactly zero.
inline constexpr double symmetry_epsilon = 1e-3;

inline MlpParams init_params(Eigen::Index d, Eigen::Index h, const WeightConfig& cfg) {
    if (d < 1 || h < 1) {
        throw ConfigError("network needs d >= 1 and h >= 1 (got d=" + std::to_string(d) + ", h=" + std::to_string(h) + ")");
    }
    const auto ramp = [](Eigen::Index k) { return 1.0 + symmetry_epsilon * static_cast<double>(k); };
    MlpParams p;
    p.iw.resize(h, d);
    for (Eigen::Index j = 0; j < h; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) {
            p.iw(j, i) = cfg.iw * ramp(j * d + i);
        }
    }
    p.b1.resize(h);
    p.lw.resize(h);
    for (Eigen::Index j = 0; j < h; ++j) {
        p.b1(j) = cfg.b1 * ramp(j);
        p.lw(j) = cfg.lw * ramp(j);
    }
    p.b2 = cfg.b2;
    return p;
}

inline double forward(const MlpParams& p, const Eigen::Ref<const Eigen::VectorXd>& x) {
    const Eigen::VectorXd hidden = (p.iw * x + p.b1).array().tanh().matrix();
    return p.b2 + p.lw.dot(hidden);
}

// Batched forward over the rows of X (N x d).
inline Eigen::VectorXd predict(const MlpParams& p, const Eigen::Ref<const Eigen::MatrixXd>& X) {
    Eigen::MatrixXd z = X * p.iw.transpose();
    z.rowwise() += p.b1.transpose();
    const Eigen::MatrixXd a = z.array().tanh().matrix();
    Eigen::VectorXd y = a * p.lw;
    y.array() += p.b2;
    return y;
}

/// Jacobian of the errors e_i = y(x_i) - t_i with respect to the flattened
/// parameters, one row per sample. Independent of the targets.
inline Eigen::MatrixXd jacobian(const MlpParams& p, const Eigen::Ref<const Eigen::MatrixXd>& X) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = p.inputs();
    const Eigen::Index h = p.hidden();
    Eigen::MatrixXd z = X * p.iw.transpose();
    z.rowwise() += p.b1.transpose();
    const Eigen::ArrayXXd a = z.array().tanh();
    // dy/dz_j = lw_j * (1 - a_j^2)
    const Eigen::ArrayXXd dz = (1.0 - a.square()).rowwise() * p.lw.transpose().array();

    Eigen::MatrixXd J(n, p.parameter_count());
    for (Eigen::Index j = 0; j < h; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) {
            J.col(j * d + i) = (dz.col(j) * X.col(i).array()).matrix();
        }
    }
    const Eigen::Index off_b1 = h * d;
    const Eigen::Index off_lw = off_b1 + h;
    J.middleCols(off_b1, h) = dz.matrix();
    J.middleCols(off_lw, h) = a.matrix();
    J.col(off_lw + h).setOnes();
    return J;
}

} // namespace sensorlab
