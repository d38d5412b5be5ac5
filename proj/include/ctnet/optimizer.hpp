#pragma once

#include "ctnet/data.hpp"
#include "ctnet/gradients.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace ctnet {

struct AdamState {
    Vector m;
    Vector v;
    long step_count = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState init(Eigen::Index n, double lr) {
        AdamState s;
        s.m = Vector::Zero(n);
        s.v = Vector::Zero(n);
        s.lr = lr;
        return s;
    }

    void validate() const {
        if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
            throw std::invalid_argument("AdamState: betas must lie in [0,1)");
        if (eps <= 0) throw std::invalid_argument("AdamState: eps must be positive");
        if (step_count < 0) throw std::invalid_argument("AdamState: negative step count");
    }
};

/// One bias-corrected ADAM update; returns the new parameter vector.
inline Vector adam_step(const Vector& params, const Vector& grad, AdamState& state) {
    if (params.size() != grad.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    state.validate();
    state.step_count += 1;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    const Vector m_hat = state.m / c1;
    const Vector v_hat = state.v / c2;
    return params - state.lr * (m_hat.array() / (v_hat.array().sqrt() + state.eps)).matrix();
}

struct TrainConfig {
    int epochs = 100;
    int batch_size = 32;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    std::optional<double> loss_tolerance;
    bool shuffle = true;
    StepControl ode;  // neural ODE solves only

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (lr <= 0) throw std::invalid_argument("TrainConfig: lr must be positive");
        ode.validate();
    }
};

struct MetricsRow {
    int epoch;
    double train_loss;
    double val_loss;
    long long cum_rhs_evals;
    double wall_ms;
};

struct RunMetrics {
    std::vector<MetricsRow> rows;
};

enum class TrainStatus { Completed, ReachedTolerance, Diverged };

inline const char* to_string(TrainStatus s) {
    switch (s) {
        case TrainStatus::Completed: return "completed";
        case TrainStatus::ReachedTolerance: return "reached_tolerance";
        case TrainStatus::Diverged: return "diverged";
    }
    return "?";
}

struct TrainResult {
    FullParams params;
    RunMetrics metrics;
    TrainStatus status = TrainStatus::Completed;
    std::string message;
    long long total_rhs_evals = 0;
};

/// Seeded parameter initialization: opening/closing entries at
/// std 1/sqrt(fan_in), coefficients at std 0.1/sqrt(fan_in) so the
/// materialized dynamics start near the identity map.
inline FullParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    FullParams p;
    const int orows = cfg.opening_rows();
    const double open_std = 1.0 / std::sqrt(double(cfg.n_features));
    p.opening.K_in = rng.normal_matrix(orows, cfg.n_features, open_std);
    p.opening.b_in = rng.normal_vector(orows, open_std);
    const double close_std = 1.0 / std::sqrt(double(cfg.channels));
    p.closing.W_out = rng.normal_matrix(cfg.m_targets, cfg.channels, close_std);
    p.closing.b_out = rng.normal_vector(cfg.m_targets, close_std);
    const double theta_std = 0.1 / std::sqrt(double(cfg.layer_rows() + 1));
    p.weights.theta = rng.normal_matrix(cfg.layer_param_count(), cfg.theta_cols(), theta_std);
    return p;
}

/// Full-set loss (no gradient); used for the per-epoch metric rows.
inline double evaluate_loss(const Dataset& ds, const FullParams& params, const ModelConfig& cfg,
                            const StepControl& ctrl, EvalCounter& counter) {
    if (ds.n_samples() == 0) return std::numeric_limits<double>::quiet_NaN();
    const Matrix pred = predict(ds.features, params, cfg, ctrl, counter);
    return loss_value(pred, ds.targets, params, cfg.alpha);
}

/// Shuffled mini-batch ADAM over the training split. Deterministic under a
/// fixed seed: initialization, shuffle stream and batch boundaries are all
/// derived from it. Non-finite losses stop the run and the last completed
/// epoch's parameters are returned. warm_start overrides the seeded
/// initialization.
inline TrainResult train(const ModelConfig& cfg, const Dataset& train_set, const Dataset& val_set,
                         const TrainConfig& tcfg, const FullParams* warm_start = nullptr) {
    cfg.validate();
    tcfg.validate();
    train_set.validate();
    if (train_set.n_samples() == 0) throw std::invalid_argument("train: empty training set");
    if (train_set.n_features() != cfg.n_features || train_set.m_targets() != cfg.m_targets)
        throw std::invalid_argument("train: dataset dimensions do not match model config");

    TrainResult result;
    result.params = warm_start ? *warm_start : init_params(cfg, tcfg.seed);
    FullParams last_good = result.params;

    Vector flat = flatten_params(result.params);
    AdamState adam = AdamState::init(flat.size(), tcfg.lr);
    Rng shuffle_rng(tcfg.seed);
    EvalCounter counter;

    const int n = train_set.n_samples();
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    const auto t_start = std::chrono::steady_clock::now();
    for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        if (tcfg.shuffle) shuffle_rng.shuffle(order);
        bool diverged = false;
        for (int at = 0; at < n && !diverged; at += tcfg.batch_size) {
            const int len = std::min(tcfg.batch_size, n - at);
            std::vector<int> batch(order.begin() + at, order.begin() + at + len);
            const Matrix bf = gather_columns(train_set.features, batch);
            const Matrix bt = gather_columns(train_set.targets, batch);
            const ModelGradient mg = model_gradient(bf, bt, result.params, cfg, tcfg.ode, counter);
            if (!std::isfinite(mg.loss)) {
                diverged = true;
                break;
            }
            flat = adam_step(flat, flatten_grad(mg.grad), adam);
            result.params = unflatten_params(flat, cfg);
        }

        const double train_loss =
            diverged ? std::numeric_limits<double>::quiet_NaN()
                     : evaluate_loss(train_set, result.params, cfg, tcfg.ode, counter);
        const double val_loss = diverged ? std::numeric_limits<double>::quiet_NaN()
                                         : evaluate_loss(val_set, result.params, cfg, tcfg.ode, counter);
        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
                .count();
        result.metrics.rows.push_back({epoch, train_loss, val_loss, counter.value(), wall_ms});

        if (diverged || !std::isfinite(train_loss)) {
            result.status = TrainStatus::Diverged;
            result.message = "non-finite loss at epoch " + std::to_string(epoch) +
                             "; keeping parameters from the previous epoch";
            result.params = last_good;
            break;
        }
        last_good = result.params;

        if (tcfg.loss_tolerance && train_loss < *tcfg.loss_tolerance) {
            result.status = TrainStatus::ReachedTolerance;
            result.message = "train loss below tolerance at epoch " + std::to_string(epoch);
            break;
        }
    }
    result.total_rhs_evals = counter.value();
    return result;
}

}  // namespace ctnet
