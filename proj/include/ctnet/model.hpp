#pragma once

#include "ctnet/basis.hpp"
#include "ctnet/integrators.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace ctnet {

enum class Arch { ResNet, Hamiltonian, NeuralODE };

inline const char* to_string(Arch a) {
    switch (a) {
        case Arch::ResNet: return "resnet";
        case Arch::Hamiltonian: return "hamiltonian";
        case Arch::NeuralODE: return "node";
    }
    return "?";
}

/// Tanh is the training activation; Identity exists for closed-form checks.
enum class Activation { Tanh, Identity };

inline Matrix activate(const Matrix& x, Activation a) {
    if (a == Activation::Identity) return x;
    return x.array().tanh().matrix();
}

/// sigma'(pre), elementwise.
inline Matrix activate_grad(const Matrix& pre, Activation a) {
    if (a == Activation::Identity) return Matrix::Ones(pre.rows(), pre.cols());
    return (1.0 - pre.array().tanh().square()).matrix();
}

/// One residual layer's weights: K is rows x (rows+1) with the last column
/// multiplying the normalized-time input feature, b is the bias.
struct LayerParams {
    Matrix K;
    Vector b;

    Eigen::Index rows() const { return K.rows(); }
    auto state_block() const { return K.leftCols(K.cols() - 1); }
    auto time_column() const { return K.col(K.cols() - 1); }
};

struct OpeningLayer {
    Matrix K_in;
    Vector b_in;
};

struct ClosingLayer {
    Matrix W_out;
    Vector b_out;
};

/// Coefficient matrix Theta. One column per basis function for polynomial
/// families, one column per time step otherwise. Rows hold a flattened
/// layer: K row-major, then b.
struct ParamWeights {
    Matrix theta;
};

struct FullParams {
    ParamWeights weights;
    OpeningLayer opening;
    ClosingLayer closing;
};

inline Vector pack_layer(const LayerParams& lp) {
    const Eigen::Index r = lp.K.rows(), c = lp.K.cols();
    Vector v(r * c + lp.b.size());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) v(k++) = lp.K(i, j);
    for (Eigen::Index i = 0; i < lp.b.size(); ++i) v(k++) = lp.b(i);
    return v;
}

inline LayerParams unpack_layer(const Vector& v, int rows) {
    const Eigen::Index r = rows, c = rows + 1;
    if (v.size() != r * c + r) throw std::invalid_argument("unpack_layer: size mismatch");
    LayerParams lp;
    lp.K.resize(r, c);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) lp.K(i, j) = v(k++);
    lp.b.resize(r);
    for (Eigen::Index i = 0; i < r; ++i) lp.b(i) = v(k++);
    return lp;
}

struct ModelConfig {
    Arch arch = Arch::ResNet;
    int channels = 15;
    int n_features = 1;
    int m_targets = 1;
    double horizon = 1.0;
    int n_steps = 12;
    WeightBasis basis{};
    Activation activation = Activation::Tanh;
    double alpha = 0.0;

    /// Width of one residual layer (the Hamiltonian splits the state into
    /// two halves of this width).
    int layer_rows() const { return arch == Arch::Hamiltonian ? channels / 2 : channels; }

    /// Rows produced by the opening layer. The Hamiltonian initializes only
    /// the position half; the momentum half starts at zero.
    int opening_rows() const { return layer_rows(); }

    int layer_param_count() const {
        const int r = layer_rows();
        return r * (r + 1) + r;
    }

    int theta_cols() const { return basis.polynomial() ? basis.count() : n_steps; }

    long trainable_param_count() const {
        const long theta = static_cast<long>(layer_param_count()) * theta_cols();
        const long opening = static_cast<long>(opening_rows()) * (n_features + 1);
        const long closing = static_cast<long>(m_targets) * (channels + 1);
        return theta + opening + closing;
    }

    /// States live on n_steps+1 points spanning [0, horizon].
    TimeGrid state_grid() const { return TimeGrid::equispaced(0.0, horizon, n_steps + 1); }

    /// Weights are evaluated at the step starts: the first n_steps points,
    /// normalized against the full horizon.
    TimeGrid weight_grid() const {
        TimeGrid g = state_grid();
        g.points.pop_back();
        return g;
    }

    double dt() const { return horizon / n_steps; }

    void validate() const {
        basis.validate();
        if (channels < 1) throw std::invalid_argument("ModelConfig: channels must be positive");
        if (n_features < 1 || m_targets < 1)
            throw std::invalid_argument("ModelConfig: feature/target dimensions must be positive");
        if (horizon <= 0.0) throw std::invalid_argument("ModelConfig: horizon must be positive");
        if (n_steps < 1) throw std::invalid_argument("ModelConfig: n_steps must be positive");
        if (alpha < 0.0) throw std::invalid_argument("ModelConfig: alpha must be non-negative");
        if (arch == Arch::Hamiltonian && channels % 2 != 0)
            throw std::invalid_argument("ModelConfig: Hamiltonian needs an even channel count");
        if (arch == Arch::NeuralODE && !basis.polynomial())
            throw std::invalid_argument(
                "ModelConfig: the neural ODE needs weights defined at arbitrary times; "
                "choose a polynomial basis (degree 0 gives constant weights)");
    }
};

/// Materialize theta(t). Polynomial families evaluate Theta * p(t) at any t
/// in the horizon; the non-parameterized family returns the stored column
/// for the matching grid point and refuses off-grid times.
inline LayerParams weights_at(const ParamWeights& w, const WeightBasis& basis, const TimeGrid& wgrid,
                              double t, int rows) {
    if (basis.polynomial()) {
        if (w.theta.cols() != basis.count())
            throw std::invalid_argument("weights_at: Theta columns do not match basis size");
        const Vector p = basis_column(basis, t, wgrid);
        return unpack_layer(w.theta * p, rows);
    }
    if (w.theta.cols() != wgrid.size())
        throw std::invalid_argument("weights_at: per-step weights do not match grid size");
    const int j = wgrid.exact_index(t);
    if (j < 0)
        throw std::invalid_argument("weights_at: off-grid time for non-parameterized weights");
    return unpack_layer(w.theta.col(j), rows);
}

/// f(u, s, theta) = sigma(K_u u + k_t s + b), broadcast over batch columns.
inline Matrix layer_f(const Matrix& u, double s, const LayerParams& lp, Activation act) {
    if (u.rows() != lp.K.rows() || lp.K.cols() != u.rows() + 1 || lp.b.size() != u.rows())
        throw std::invalid_argument("layer_f: shape mismatch");
    Matrix pre = lp.state_block() * u;
    pre.colwise() += (s * lp.time_column() + lp.b).eval();
    return activate(pre, act);
}

inline Matrix open_layer(const Matrix& features, const OpeningLayer& layer, Activation act) {
    if (layer.K_in.cols() != features.rows() || layer.b_in.size() != layer.K_in.rows())
        throw std::invalid_argument("open_layer: shape mismatch");
    Matrix pre = layer.K_in * features;
    pre.colwise() += layer.b_in;
    return activate(pre, act);
}

inline Matrix close_layer(const Matrix& u, const ClosingLayer& layer) {
    if (layer.W_out.cols() != u.rows() || layer.b_out.size() != layer.W_out.rows())
        throw std::invalid_argument("close_layer: shape mismatch");
    Matrix pred = layer.W_out * u;
    pred.colwise() += layer.b_out;
    return pred;
}

struct ResnetTrajectory {
    std::vector<Matrix> states;  // n_steps + 1 entries

    const Matrix& final_state() const { return states.back(); }
};

/// Forward Euler sweep u_{n+1} = u_n + dt f(u_n, t_n, theta(t_n)), keeping
/// every intermediate state for backpropagation.
inline ResnetTrajectory resnet_forward(const Matrix& u0, const ParamWeights& w, const ModelConfig& cfg,
                                       const TimeGrid& state_grid, EvalCounter& counter) {
    if (state_grid.size() != cfg.n_steps + 1 || !state_grid.equispaced())
        throw std::invalid_argument("resnet_forward: expected an equispaced grid of n_steps+1 points");
    const TimeGrid wgrid = cfg.weight_grid();
    const double dt = cfg.dt();
    ResnetTrajectory traj;
    traj.states.reserve(cfg.n_steps + 1);
    traj.states.push_back(u0);
    for (int n = 0; n < cfg.n_steps; ++n) {
        const double tn = state_grid.points[n];
        const LayerParams lp = weights_at(w, cfg.basis, wgrid, tn, cfg.layer_rows());
        traj.states.push_back(traj.states.back() +
                              dt * layer_f(traj.states.back(), wgrid.normalized(tn), lp, cfg.activation));
    }
    counter.add(cfg.n_steps);
    return traj;
}

struct VerletTrajectory {
    std::vector<Matrix> pos;  // y half, n_steps + 1 entries
    std::vector<Matrix> mom;  // z half, n_steps + 1 entries

    Matrix final_state() const {
        Matrix u(pos.back().rows() + mom.back().rows(), pos.back().cols());
        u << pos.back(), mom.back();
        return u;
    }
};

/// Verlet sweep over the split state (y, z). Both half-updates share the
/// step's weights; the z update sees the already-advanced y.
inline VerletTrajectory hamiltonian_forward(const Matrix& u0, const ParamWeights& w,
                                            const ModelConfig& cfg, const TimeGrid& state_grid,
                                            EvalCounter& counter) {
    if (cfg.channels % 2 != 0)
        throw std::invalid_argument("hamiltonian_forward: odd channel count");
    if (u0.rows() != cfg.channels)
        throw std::invalid_argument("hamiltonian_forward: state rows must equal channels");
    if (state_grid.size() != cfg.n_steps + 1 || !state_grid.equispaced())
        throw std::invalid_argument("hamiltonian_forward: expected an equispaced grid of n_steps+1 points");
    const int h = cfg.channels / 2;
    const TimeGrid wgrid = cfg.weight_grid();
    const double dt = cfg.dt();

    VerletTrajectory traj;
    traj.pos.reserve(cfg.n_steps + 1);
    traj.mom.reserve(cfg.n_steps + 1);
    traj.pos.push_back(u0.topRows(h));
    traj.mom.push_back(u0.bottomRows(h));
    for (int n = 0; n < cfg.n_steps; ++n) {
        const double tn = state_grid.points[n];
        const double s = wgrid.normalized(tn);
        const LayerParams lp = weights_at(w, cfg.basis, wgrid, tn, h);
        const Vector shift = (s * lp.time_column() + lp.b).eval();

        Matrix pre_y = lp.state_block().transpose() * traj.mom.back();
        pre_y.colwise() += shift;
        Matrix y1 = traj.pos.back() + dt * activate(pre_y, cfg.activation);

        Matrix pre_z = lp.state_block() * y1;
        pre_z.colwise() += shift;
        Matrix z1 = traj.mom.back() - dt * activate(pre_z, cfg.activation);

        traj.pos.push_back(std::move(y1));
        traj.mom.push_back(std::move(z1));
    }
    counter.add(2LL * cfg.n_steps);
    return traj;
}

/// Exact inverse of hamiltonian_forward: undoes the staggered updates in
/// reverse order, recovering (y0, z0) up to round-off.
inline std::pair<Matrix, Matrix> hamiltonian_reverse(const Matrix& yN, const Matrix& zN,
                                                     const ParamWeights& w, const ModelConfig& cfg,
                                                     const TimeGrid& state_grid) {
    const int h = cfg.channels / 2;
    const TimeGrid wgrid = cfg.weight_grid();
    const double dt = cfg.dt();
    Matrix y = yN, z = zN;
    for (int n = cfg.n_steps - 1; n >= 0; --n) {
        const double tn = state_grid.points[n];
        const double s = wgrid.normalized(tn);
        const LayerParams lp = weights_at(w, cfg.basis, wgrid, tn, h);
        const Vector shift = (s * lp.time_column() + lp.b).eval();

        Matrix pre_z = lp.state_block() * y;
        pre_z.colwise() += shift;
        z += dt * activate(pre_z, cfg.activation);

        Matrix pre_y = lp.state_block().transpose() * z;
        pre_y.colwise() += shift;
        y -= dt * activate(pre_y, cfg.activation);
    }
    return {std::move(y), std::move(z)};
}

/// The neural ODE vector field f(u, t, theta_P(t)).
inline Matrix node_rhs(const Matrix& u, double t, const ParamWeights& w, const ModelConfig& cfg,
                       const TimeGrid& wgrid, EvalCounter& counter) {
    if (!cfg.basis.polynomial())
        throw std::invalid_argument("node_rhs: continuous-time weights need a polynomial basis");
    const LayerParams lp = weights_at(w, cfg.basis, wgrid, t, cfg.layer_rows());
    counter.add(1);
    return layer_f(u, wgrid.normalized(t), lp, cfg.activation);
}

inline Vector flatten_state(const Matrix& m) {
    return Eigen::Map<const Vector>(m.data(), m.size());
}

inline Matrix unflatten_state(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
    if (v.size() != rows * cols) throw std::invalid_argument("unflatten_state: size mismatch");
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

/// Initial network state from the raw features. The Hamiltonian gets the
/// opening output as its position half and a zero momentum half.
inline Matrix initial_state(const Matrix& features, const FullParams& params, const ModelConfig& cfg) {
    const Matrix h0 = open_layer(features, params.opening, cfg.activation);
    if (cfg.arch != Arch::Hamiltonian) return h0;
    Matrix u0 = Matrix::Zero(cfg.channels, features.cols());
    u0.topRows(cfg.channels / 2) = h0;
    return u0;
}

/// End-to-end forward map features -> predictions.
inline Matrix predict(const Matrix& features, const FullParams& params, const ModelConfig& cfg,
                      const StepControl& ctrl, EvalCounter& counter) {
    cfg.validate();
    const Matrix u0 = initial_state(features, params, cfg);
    switch (cfg.arch) {
        case Arch::ResNet: {
            const auto traj = resnet_forward(u0, params.weights, cfg, cfg.state_grid(), counter);
            return close_layer(traj.final_state(), params.closing);
        }
        case Arch::Hamiltonian: {
            const auto traj = hamiltonian_forward(u0, params.weights, cfg, cfg.state_grid(), counter);
            return close_layer(traj.final_state(), params.closing);
        }
        case Arch::NeuralODE: {
            const TimeGrid wgrid = cfg.weight_grid();
            auto rhs = [&](double t, const Vector& x) {
                const Matrix u = unflatten_state(x, cfg.channels, features.cols());
                return flatten_state(node_rhs(u, t, params.weights, cfg, wgrid, counter));
            };
            const SolveRecord rec =
                dopri5_solve(rhs, flatten_state(u0), 0.0, cfg.horizon, ctrl, /*keep_dense=*/false);
            const Matrix uT = unflatten_state(rec.final_state(), cfg.channels, features.cols());
            return close_layer(uT, params.closing);
        }
    }
    throw std::logic_error("predict: unknown architecture");
}

}  // namespace ctnet
