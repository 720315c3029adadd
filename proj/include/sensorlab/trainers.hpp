#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "sensorlab/dataset.hpp"
#include "sensorlab/error.hpp"
#include "sensorlab/netcore.hpp"

namespace sensorlab {

enum class TrainerKind { lm, br };

inline const char* to_string(TrainerKind k) noexcept { return k == TrainerKind::lm ? "LM" : "BR"; }

inline TrainerKind parse_trainer(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (s == "LM" || s == "TRAINLM") {
        return TrainerKind::lm;
    }
    if (s == "BR" || s == "TRAINBR") {
        return TrainerKind::br;
    }
    throw ConfigError("unknown trainer '" + s + "' (expected LM or BR)");
}

/// Damping schedule and stopping rules shared by both trainers.
struct TrainOptions {
    int max_epochs = 1000;
    double mu0 = 1e-3;
    double mu_inc = 10.0;
    double mu_dec = 0.1;
    double mu_max = 1e10;
    int max_fail = 6;
    double min_grad = 1e-7;

    void validate() const {
        if (max_epochs <= 0 || max_fail <= 0) {
            throw ConfigError("max_epochs and max_fail must be positive");
        }
        if (!(mu0 > 0.0) || !(mu_max > 0.0) || !(min_grad > 0.0)) {
            throw ConfigError("mu0, mu_max and min_grad must be positive");
        }
        if (!(mu_dec > 0.0 && mu_dec < 1.0 && mu_inc > 1.0)) {
            throw ConfigError("damping factors need 0 < mu_dec < 1 < mu_inc");
        }
    }

    bool operator==(const TrainOptions&) const = default;
};

enum class StopReason { max_epochs, val_patience, min_grad, mu_max, converged };

inline const char* to_string(StopReason r) noexcept {
    switch (r) {
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::val_patience: return "val_patience";
    case StopReason::min_grad: return "min_grad";
    case StopReason::mu_max: return "mu_max";
    case StopReason::converged: return "converged";
    }
    return "?";
}

struct EpochRecord {
    int epoch = 0;
    double train_sse = 0.0;
    double val_sse = 0.0;
    double mu = 0.0;
    // Bayesian regularization only; NaN under LM.
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double beta = std::numeric_limits<double>::quiet_NaN();
    double gamma = std::numeric_limits<double>::quiet_NaN();
};

struct TrainedModel {
    MlpParams params;
    TrainerKind kind = TrainerKind::lm;
    int epochs_run = 0;
    StopReason stop_reason = StopReason::max_epochs;
    std::vector<EpochRecord> history;
    double initial_train_sse = 0.0;
    // Epoch whose parameters were returned (0 = the initial parameters).
    int best_epoch = 0;
    // Final hyperparameters of Bayesian regularization; NaN under LM.
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double beta = std::numeric_limits<double>::quiet_NaN();
    double gamma = std::numeric_limits<double>::quiet_NaN();
    // Times an alpha/beta update came out non-positive and was held back.
    int clamp_events = 0;
};

// Damping never drops below this, so repeated acceptances cannot underflow
// mu to zero on a rank-deficient J'J.
inline constexpr double mu_floor = 1e-20;

// BR stops once the effective parameter count moves less than this for
// gamma_patience consecutive epochs.
inline constexpr double gamma_tolerance = 1e-3;
inline constexpr int gamma_patience = 5;

namespace detail {

struct TrainingSubsets {
    Eigen::MatrixXd x_train;
    Eigen::VectorXd t_train;
    Eigen::MatrixXd x_val;
    Eigen::VectorXd t_val;
};

inline TrainingSubsets make_subsets(const MlpParams& init, const Dataset& data, const SplitIndices& split) {
    if (init.inputs() != data.dims()) {
        throw DataError("network expects " + std::to_string(init.inputs()) + " inputs, dataset has " +
                        std::to_string(data.dims()));
    }
    if (!init.finite()) {
        throw NumericError("initial parameters are not finite");
    }
    if (split.train.empty()) {
        throw DataError("training subset is empty");
    }
    const auto check = [&](const std::vector<Index>& idx) {
        for (Index i : idx) {
            if (i < 0 || i >= data.size()) {
                throw DataError("split index " + std::to_string(i) + " out of range for " + std::to_string(data.size()) +
                                " samples");
            }
        }
    };
    check(split.train);
    check(split.val);
    TrainingSubsets s;
    const Dataset tr = data.subset(split.train);
    const Dataset va = data.subset(split.val);
    s.x_train = tr.inputs;
    s.t_train = tr.targets;
    s.x_val = va.inputs;
    s.t_val = va.targets;
    return s;
}

inline double sse(const MlpParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& t) {
    if (x.rows() == 0) {
        return 0.0;
    }
    return (predict(p, x) - t).squaredNorm();
}

inline double trace_of_inverse(const Eigen::MatrixXd& spd) {
    Eigen::LLT<Eigen::MatrixXd> llt(spd);
    if (llt.info() != Eigen::Success) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(spd.rows(), spd.cols()));
    return inv.trace();
}

} // namespace detail

/// Levenberg-Marquardt on the training subset with validation early stopping.
///
/// Each epoch solves (J'J + mu I) dx = -J'e, raising mu by mu_inc until the
/// training SSE drops (then mu *= mu_dec). Returns the parameters from the
/// epoch with the lowest validation SSE.
inline TrainedModel train_lm(const MlpParams& init, const Dataset& data, const SplitIndices& split,
                             const TrainOptions& opts) {
    opts.validate();
    const auto sub = detail::make_subsets(init, data, split);
    const Index d = init.inputs();
    const Index h = init.hidden();

    TrainedModel out;
    out.kind = TrainerKind::lm;

    Eigen::VectorXd theta = init.flatten();
    MlpParams cur = init;
    Eigen::VectorXd e = predict(cur, sub.x_train) - sub.t_train;
    double sse = e.squaredNorm();
    if (!std::isfinite(sse)) {
        throw NumericError("non-finite initial training error");
    }
    double val = detail::sse(cur, sub.x_val, sub.t_val);
    out.initial_train_sse = sse;

    MlpParams best = cur;
    double best_val = val;
    int fails = 0;
    double mu = opts.mu0;
    Eigen::MatrixXd J = jacobian(cur, sub.x_train);

    const auto record = [&](int epoch) { out.history.push_back({epoch, sse, val, mu}); };

    out.stop_reason = StopReason::max_epochs;
    for (int epoch = 1; epoch <= opts.max_epochs; ++epoch) {
        const Eigen::VectorXd g = J.transpose() * e;
        if (sse == 0.0) {
            record(epoch);
            out.stop_reason = StopReason::converged;
            break;
        }
        if (2.0 * g.norm() < opts.min_grad) {
            record(epoch);
            out.stop_reason = StopReason::min_grad;
            break;
        }
        Eigen::MatrixXd jtj = J.transpose() * J;

        bool accepted = false;
        while (mu <= opts.mu_max) {
            Eigen::MatrixXd a = jtj;
            a.diagonal().array() += mu;
            Eigen::LLT<Eigen::MatrixXd> llt(a);
            if (llt.info() == Eigen::Success) {
                const Eigen::VectorXd trial = theta - llt.solve(g);
                MlpParams tp = MlpParams::unflatten(d, h, trial);
                Eigen::VectorXd te = predict(tp, sub.x_train) - sub.t_train;
                const double tsse = te.squaredNorm();
                if (std::isfinite(tsse) && tsse < sse) {
                    theta = trial;
                    cur = std::move(tp);
                    e = std::move(te);
                    sse = tsse;
                    mu = std::max(mu * opts.mu_dec, mu_floor);
                    accepted = true;
                    break;
                }
            }
            mu *= opts.mu_inc;
        }
        if (!accepted) {
            record(epoch);
            out.stop_reason = StopReason::mu_max;
            break;
        }

        J = jacobian(cur, sub.x_train);
        val = detail::sse(cur, sub.x_val, sub.t_val);
        record(epoch);
        if (val < best_val) {
            best = cur;
            best_val = val;
            out.best_epoch = epoch;
            fails = 0;
        } else if (val > best_val && ++fails >= opts.max_fail) {
            out.stop_reason = StopReason::val_patience;
            break;
        }
    }

    out.params = std::move(best);
    out.epochs_run = static_cast<int>(out.history.size());
    return out;
}

/// Bayesian-regularized Levenberg-Marquardt.
///
/// Minimizes F = beta*E_D + alpha*E_W, with E_D the training SSE and E_W the
/// sum of squared parameters. After every accepted step the effective
/// parameter count gamma = P - alpha*tr((beta J'J + alpha I)^-1) is
/// re-estimated and alpha = gamma/(2 E_W), beta = (N - gamma)/(2 E_D).
/// The validation subset is tracked in the history but never stops training.
inline TrainedModel train_br(const MlpParams& init, const Dataset& data, const SplitIndices& split,
                             const TrainOptions& opts) {
    opts.validate();
    const auto sub = detail::make_subsets(init, data, split);
    const Index d = init.inputs();
    const Index h = init.hidden();
    const Index p_count = init.parameter_count();
    const auto n_params = static_cast<double>(p_count);
    const auto n_errors = static_cast<double>(sub.x_train.rows());

    TrainedModel out;
    out.kind = TrainerKind::br;

    Eigen::VectorXd theta = init.flatten();
    MlpParams cur = init;
    Eigen::VectorXd e = predict(cur, sub.x_train) - sub.t_train;
    double sse = e.squaredNorm();
    if (!std::isfinite(sse)) {
        throw NumericError("non-finite initial training error");
    }
    double ssx = theta.squaredNorm();
    double val = detail::sse(cur, sub.x_val, sub.t_val);
    out.initial_train_sse = sse;

    double gamma = n_params;
    double beta = sse == 0.0 ? 1.0 : (n_errors - gamma) / (2.0 * sse);
    if (!(beta > 0.0)) {
        beta = 1.0;
    }
    double alpha = ssx == 0.0 ? 1.0 : gamma / (2.0 * ssx);
    double objective = beta * sse + alpha * ssx;
    double mu = opts.mu0;
    Eigen::MatrixXd J = jacobian(cur, sub.x_train);
    Eigen::MatrixXd jtj = J.transpose() * J;
    int stable = 0;

    const auto record = [&](int epoch) { out.history.push_back({epoch, sse, val, mu, alpha, beta, gamma}); };

    out.stop_reason = StopReason::max_epochs;
    for (int epoch = 1; epoch <= opts.max_epochs; ++epoch) {
        const Eigen::VectorXd g = beta * (J.transpose() * e) + alpha * theta;
        if (sse == 0.0) {
            record(epoch);
            out.stop_reason = StopReason::converged;
            break;
        }
        if (2.0 * g.norm() < opts.min_grad) {
            record(epoch);
            out.stop_reason = StopReason::min_grad;
            break;
        }

        bool accepted = false;
        while (mu <= opts.mu_max) {
            Eigen::MatrixXd a = beta * jtj;
            a.diagonal().array() += mu + alpha;
            Eigen::LLT<Eigen::MatrixXd> llt(a);
            if (llt.info() == Eigen::Success) {
                const Eigen::VectorXd trial = theta - llt.solve(g);
                MlpParams tp = MlpParams::unflatten(d, h, trial);
                Eigen::VectorXd te = predict(tp, sub.x_train) - sub.t_train;
                const double tsse = te.squaredNorm();
                const double tssx = trial.squaredNorm();
                const double tobj = beta * tsse + alpha * tssx;
                if (std::isfinite(tobj) && tobj < objective) {
                    theta = trial;
                    cur = std::move(tp);
                    e = std::move(te);
                    sse = tsse;
                    ssx = tssx;
                    mu = std::max(mu * opts.mu_dec, mu_floor);
                    accepted = true;
                    break;
                }
            }
            mu *= opts.mu_inc;
        }
        if (!accepted) {
            record(epoch);
            out.stop_reason = StopReason::mu_max;
            break;
        }

        J = jacobian(cur, sub.x_train);
        jtj = J.transpose() * J;

        Eigen::MatrixXd hess = beta * jtj;
        hess.diagonal().array() += alpha;
        const double tr = detail::trace_of_inverse(hess);
        const double previous_gamma = gamma;
        if (std::isfinite(tr)) {
            gamma = std::clamp(n_params - alpha * tr, 0.0, n_params);
        }
        const double next_alpha = ssx == 0.0 ? 1.0 : gamma / (2.0 * ssx);
        const double next_beta = sse == 0.0 ? 1.0 : (n_errors - gamma) / (2.0 * sse);
        if (next_alpha > 0.0 && std::isfinite(next_alpha)) {
            alpha = next_alpha;
        } else {
            ++out.clamp_events;
        }
        if (next_beta > 0.0 && std::isfinite(next_beta)) {
            beta = next_beta;
        } else {
            ++out.clamp_events;
        }
        objective = beta * sse + alpha * ssx;

        val = detail::sse(cur, sub.x_val, sub.t_val);
        record(epoch);

        stable = std::abs(gamma - previous_gamma) < gamma_tolerance ? stable + 1 : 0;
        if (stable >= gamma_patience) {
            out.stop_reason = StopReason::converged;
            break;
        }
    }

    out.params = std::move(cur);
    out.epochs_run = static_cast<int>(out.history.size());
    out.best_epoch = out.epochs_run;
    out.alpha = alpha;
    out.beta = beta;
    out.gamma = gamma;
    return out;
}

inline TrainedModel train(TrainerKind kind, const MlpParams& init, const Dataset& data, const SplitIndices& split,
                          const TrainOptions& opts) {
    return kind == TrainerKind::lm ? train_lm(init, data, split, opts) : train_br(init, data, split, opts);
}

// epoch,train_sse,val_sse,mu[,alpha,beta,gamma]
inline void write_history_csv(std::ostream& out, const TrainedModel& model) {
    const bool br = model.kind == TrainerKind::br;
    out << "epoch,train_sse,val_sse,mu" << (br ? ",alpha,beta,gamma" : "") << '\n';
    for (const auto& r : model.history) {
        out << r.epoch << ',' << format_double(r.train_sse) << ',' << format_double(r.val_sse) << ','
            << format_double(r.mu);
        if (br) {
            out << ',' << format_double(r.alpha) << ',' << format_double(r.beta) << ',' << format_double(r.gamma);
        }
        out << '\n';
    }
}

} // namespace sensorlab
