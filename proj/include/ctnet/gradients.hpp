#pragma once

#include "ctnet/model.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace ctnet {

/// Gradients for every trainable block, shape-matched to FullParams.
struct GradBundle {
    Matrix theta;
    Matrix K_in;
    Vector b_in;
    Matrix W_out;
    Vector b_out;

    static GradBundle zeros_like(const FullParams& p) {
        GradBundle g;
        g.theta = Matrix::Zero(p.weights.theta.rows(), p.weights.theta.cols());
        g.K_in = Matrix::Zero(p.opening.K_in.rows(), p.opening.K_in.cols());
        g.b_in = Vector::Zero(p.opening.b_in.size());
        g.W_out = Matrix::Zero(p.closing.W_out.rows(), p.closing.W_out.cols());
        g.b_out = Vector::Zero(p.closing.b_out.size());
        return g;
    }

    GradBundle& operator+=(const GradBundle& o) {
        theta += o.theta;
        K_in += o.K_in;
        b_in += o.b_in;
        W_out += o.W_out;
        b_out += o.b_out;
        return *this;
    }
};

inline double params_squared_norm(const FullParams& p) {
    return p.weights.theta.squaredNorm() + p.opening.K_in.squaredNorm() +
           p.opening.b_in.squaredNorm() + p.closing.W_out.squaredNorm() +
           p.closing.b_out.squaredNorm();
}

/// Mean over the batch of half the squared residual norm.
inline double data_loss(const Matrix& pred, const Matrix& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw std::invalid_argument("data_loss: shape mismatch");
    return 0.5 * (pred - target).squaredNorm() / static_cast<double>(pred.cols());
}

inline double loss_value(const Matrix& pred, const Matrix& target, const FullParams& params,
                         double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("loss_value: alpha must be non-negative");
    return data_loss(pred, target) + 0.5 * alpha * params_squared_norm(params);
}

/// a(T) = d(data loss)/d u(T), pulled back through the closing layer.
inline Matrix terminal_adjoint(const Matrix& pred, const Matrix& target, const ClosingLayer& closing) {
    const Matrix residual = pred - target;
    return closing.W_out.transpose() * residual / static_cast<double>(pred.cols());
}

namespace detail {

inline void add_regularization(GradBundle& g, const FullParams& p, double alpha) {
    if (alpha == 0.0) return;
    g.theta += alpha * p.weights.theta;
    g.K_in += alpha * p.opening.K_in;
    g.b_in += alpha * p.opening.b_in;
    g.W_out += alpha * p.closing.W_out;
    g.b_out += alpha * p.closing.b_out;
}

inline void closing_gradient(GradBundle& g, const Matrix& residual, const Matrix& uN) {
    const double inv_b = 1.0 / static_cast<double>(residual.cols());
    g.W_out = residual * uN.transpose() * inv_b;
    g.b_out = residual.rowwise().sum() * inv_b;
}

/// Backprop through the opening layer given a0 = dL/d(opening output).
inline void opening_gradient(GradBundle& g, const Matrix& a0, const Matrix& features,
                             const OpeningLayer& opening, Activation act) {
    Matrix pre = opening.K_in * features;
    pre.colwise() += opening.b_in;
    const Matrix g0 = a0.cwiseProduct(activate_grad(pre, act));
    g.K_in = g0 * features.transpose();
    g.b_in = g0.rowwise().sum();
}

/// Gradient of sum_batch(gpre . pre) w.r.t. one layer's packed parameters,
/// where pre = K_u u + k_t s + b.
inline Vector layer_param_gradient(const Matrix& gpre, const Matrix& u, double s) {
    LayerParams lp;
    const Eigen::Index r = gpre.rows();
    lp.K.resize(r, r + 1);
    lp.K.leftCols(r) = gpre * u.transpose();
    lp.K.col(r) = s * gpre.rowwise().sum();
    lp.b = gpre.rowwise().sum();
    return pack_layer(lp);
}

}  // namespace detail

/// Exact reverse sweep through the stored Euler trajectory. Per-step weight
/// gradients are projected onto the coefficients as G A^T for polynomial
/// families; the non-parameterized family keeps them column-for-column.
inline GradBundle resnet_backward(const ResnetTrajectory& traj, const FullParams& params,
                                  const ModelConfig& cfg, const Matrix& features,
                                  const Matrix& residual) {
    const int n_steps = cfg.n_steps;
    if (static_cast<int>(traj.states.size()) != n_steps + 1)
        throw std::invalid_argument("resnet_backward: trajectory does not match config");
    const TimeGrid wgrid = cfg.weight_grid();
    const double dt = cfg.dt();
    const int rows = cfg.layer_rows();

    GradBundle g = GradBundle::zeros_like(params);
    detail::closing_gradient(g, residual, traj.final_state());

    Matrix a = params.closing.W_out.transpose() * residual / static_cast<double>(residual.cols());

    Matrix step_grads(cfg.layer_param_count(), n_steps);
    for (int n = n_steps - 1; n >= 0; --n) {
        const double tn = wgrid.points[n];
        const double s = wgrid.normalized(tn);
        const LayerParams lp = weights_at(params.weights, cfg.basis, wgrid, tn, rows);
        Matrix pre = lp.state_block() * traj.states[n];
        pre.colwise() += (s * lp.time_column() + lp.b).eval();
        const Matrix gpre = a.cwiseProduct(activate_grad(pre, cfg.activation)) * dt;
        step_grads.col(n) = detail::layer_param_gradient(gpre, traj.states[n], s);
        a += lp.state_block().transpose() * gpre;
    }

    if (cfg.basis.polynomial()) {
        const Matrix A = build_basis_matrix(cfg.basis, wgrid);
        g.theta = step_grads * A.transpose();
    } else {
        g.theta = std::move(step_grads);
    }

    detail::opening_gradient(g, a, features, params.opening, cfg.activation);
    detail::add_regularization(g, params, cfg.alpha);
    return g;
}

/// Reverse sweep mirroring the staggered Verlet updates: the z half-update
/// is undone first (it saw the advanced y), then the y half-update.
inline GradBundle hamiltonian_backward(const VerletTrajectory& traj, const FullParams& params,
                                       const ModelConfig& cfg, const Matrix& features,
                                       const Matrix& residual) {
    const int n_steps = cfg.n_steps;
    if (static_cast<int>(traj.pos.size()) != n_steps + 1)
        throw std::invalid_argument("hamiltonian_backward: trajectory does not match config");
    const int h = cfg.channels / 2;
    const TimeGrid wgrid = cfg.weight_grid();
    const double dt = cfg.dt();

    GradBundle g = GradBundle::zeros_like(params);
    detail::closing_gradient(g, residual, traj.final_state());

    const Matrix aT =
        params.closing.W_out.transpose() * residual / static_cast<double>(residual.cols());
    Matrix ay = aT.topRows(h);
    Matrix az = aT.bottomRows(h);

    Matrix step_grads(cfg.layer_param_count(), n_steps);
    for (int n = n_steps - 1; n >= 0; --n) {
        const double tn = wgrid.points[n];
        const double s = wgrid.normalized(tn);
        const LayerParams lp = weights_at(params.weights, cfg.basis, wgrid, tn, h);
        const Vector shift = (s * lp.time_column() + lp.b).eval();

        // z_{n+1} = z_n - dt sigma(K_u y_{n+1} + shift)
        Matrix pre_z = lp.state_block() * traj.pos[n + 1];
        pre_z.colwise() += shift;
        const Matrix gq = az.cwiseProduct(activate_grad(pre_z, cfg.activation)) * (-dt);
        ay += lp.state_block().transpose() * gq;

        // y_{n+1} = y_n + dt sigma(K_u^T z_n + shift)
        Matrix pre_y = lp.state_block().transpose() * traj.mom[n];
        pre_y.colwise() += shift;
        const Matrix gp = ay.cwiseProduct(activate_grad(pre_y, cfg.activation)) * dt;

        LayerParams glp;
        glp.K.resize(h, h + 1);
        glp.K.leftCols(h) = gq * traj.pos[n + 1].transpose() + traj.mom[n] * gp.transpose();
        glp.K.col(h) = (gq + gp).rowwise().sum() * s;
        glp.b = (gq + gp).rowwise().sum();
        step_grads.col(n) = pack_layer(glp);

        az += lp.state_block() * gp;
    }

    if (cfg.basis.polynomial()) {
        const Matrix A = build_basis_matrix(cfg.basis, wgrid);
        g.theta = step_grads * A.transpose();
    } else {
        g.theta = std::move(step_grads);
    }

    detail::opening_gradient(g, ay, features, params.opening, cfg.activation);
    detail::add_regularization(g, params, cfg.alpha);
    return g;
}

/// Adjoint vector field da/dt = -(d f/d u)^T a for the tanh layer:
/// -K_u^T (sigma'(pre) . a).
inline Matrix adjoint_rhs(const Matrix& a, const Matrix& u_at_t, double t, const ParamWeights& w,
                          const ModelConfig& cfg, const TimeGrid& wgrid) {
    const LayerParams lp = weights_at(w, cfg.basis, wgrid, t, cfg.layer_rows());
    const double s = wgrid.normalized(t);
    Matrix pre = lp.state_block() * u_at_t;
    pre.colwise() += (s * lp.time_column() + lp.b).eval();
    const Matrix da = a.cwiseProduct(activate_grad(pre, cfg.activation));
    return -(lp.state_block().transpose() * da);
}

struct NodeGradient {
    double loss = 0.0;
    GradBundle grad;
    SolveRecord forward;
    SolveRecord backward;
};

/// Continuous adjoint gradient for the neural ODE. The forward solve keeps
/// dense output; the backward solve integrates the adjoint together with
/// the projected coefficient gradients d l/d theta_i =
/// int a(t)^T p_i(t) (df/d theta_P) dt as one augmented system, so the
/// quadrature error obeys the same tolerances as the adjoint itself.
inline NodeGradient node_gradient(const Matrix& features, const Matrix& targets,
                                  const FullParams& params, const ModelConfig& cfg,
                                  const StepControl& ctrl, EvalCounter& counter) {
    cfg.validate();
    if (cfg.arch != Arch::NeuralODE)
        throw std::invalid_argument("node_gradient: config is not a neural ODE");
    const int c = cfg.channels;
    const Eigen::Index batch = features.cols();
    const TimeGrid wgrid = cfg.weight_grid();
    const int p_count = cfg.layer_param_count();
    const int d = cfg.basis.count();

    NodeGradient out;
    out.grad = GradBundle::zeros_like(params);

    // forward solve with dense output for the backward pass
    const Matrix u0 = initial_state(features, params, cfg);
    auto fwd_rhs = [&](double t, const Vector& x) {
        const Matrix u = unflatten_state(x, c, batch);
        return flatten_state(node_rhs(u, t, params.weights, cfg, wgrid, counter));
    };
    out.forward = dopri5_solve(fwd_rhs, flatten_state(u0), 0.0, cfg.horizon, ctrl, /*keep_dense=*/true);

    const Matrix uT = unflatten_state(out.forward.final_state(), c, batch);
    const Matrix pred = close_layer(uT, params.closing);
    const Matrix residual = pred - targets;
    out.loss = loss_value(pred, targets, params, cfg.alpha);

    detail::closing_gradient(out.grad, residual, uT);
    const Matrix aT = params.closing.W_out.transpose() * residual / static_cast<double>(batch);

    // augmented backward state: [a (c*batch); g_theta (p_count*d)]
    Vector xa(c * batch + p_count * d);
    xa.head(c * batch) = flatten_state(aT);
    xa.tail(p_count * d).setZero();

    auto bwd_rhs = [&](double t, const Vector& x) {
        const Matrix a = unflatten_state(x.head(c * batch), c, batch);
        const Matrix u = unflatten_state(out.forward.sample(t), c, batch);
        const LayerParams lp = weights_at(params.weights, cfg.basis, wgrid, t, c);
        const double s = wgrid.normalized(t);
        counter.add(1);

        Matrix pre = lp.state_block() * u;
        pre.colwise() += (s * lp.time_column() + lp.b).eval();
        const Matrix gpre = a.cwiseProduct(activate_grad(pre, cfg.activation));

        Vector dx(x.size());
        dx.head(c * batch) = flatten_state((-(lp.state_block().transpose() * gpre)).eval());
        // g runs from g(T)=0 to g(0)=integral, so dg/dt = -integrand
        const Vector v = detail::layer_param_gradient(gpre, u, s);
        const Vector p = basis_column(cfg.basis, t, wgrid);
        dx.tail(p_count * d) = -flatten_state((v * p.transpose()).eval());
        return dx;
    };
    out.backward = dopri5_solve_reverse(bwd_rhs, xa, cfg.horizon, 0.0, ctrl);

    const Vector& x0 = out.backward.final_state();
    out.grad.theta = unflatten_state(x0.tail(p_count * d), p_count, d);

    const Matrix a0 = unflatten_state(x0.head(c * batch), c, batch);
    detail::opening_gradient(out.grad, a0, features, params.opening, cfg.activation);
    detail::add_regularization(out.grad, params, cfg.alpha);
    return out;
}

// ---------------------------------------------------------------------------
// flat parameter views (optimizer steps, finite differences)
// ---------------------------------------------------------------------------

inline Eigen::Index flat_param_size(const ModelConfig& cfg) {
    return cfg.trainable_param_count();
}

inline Vector flatten_params(const FullParams& p) {
    Vector v(p.weights.theta.size() + p.opening.K_in.size() + p.opening.b_in.size() +
             p.closing.W_out.size() + p.closing.b_out.size());
    Eigen::Index at = 0;
    auto put = [&](const double* data, Eigen::Index n) {
        v.segment(at, n) = Eigen::Map<const Vector>(data, n);
        at += n;
    };
    put(p.weights.theta.data(), p.weights.theta.size());
    put(p.opening.K_in.data(), p.opening.K_in.size());
    put(p.opening.b_in.data(), p.opening.b_in.size());
    put(p.closing.W_out.data(), p.closing.W_out.size());
    put(p.closing.b_out.data(), p.closing.b_out.size());
    return v;
}

inline FullParams unflatten_params(const Vector& v, const ModelConfig& cfg) {
    FullParams p;
    const Eigen::Index pc = cfg.layer_param_count(), tc = cfg.theta_cols();
    const Eigen::Index orows = cfg.opening_rows();
    Eigen::Index at = 0;
    auto take = [&](Eigen::Index rows, Eigen::Index cols) {
        Matrix m = Eigen::Map<const Matrix>(v.data() + at, rows, cols);
        at += rows * cols;
        return m;
    };
    p.weights.theta = take(pc, tc);
    p.opening.K_in = take(orows, cfg.n_features);
    p.opening.b_in = take(orows, 1);
    p.closing.W_out = take(cfg.m_targets, cfg.channels);
    p.closing.b_out = take(cfg.m_targets, 1);
    if (at != v.size()) throw std::invalid_argument("unflatten_params: size mismatch");
    return p;
}

inline Vector flatten_grad(const GradBundle& g) {
    FullParams p;
    p.weights.theta = g.theta;
    p.opening.K_in = g.K_in;
    p.opening.b_in = g.b_in;
    p.closing.W_out = g.W_out;
    p.closing.b_out = g.b_out;
    return flatten_params(p);
}

/// Central finite differences over every scalar parameter, step
/// h_base * max(1, |x_i|) per coordinate.
template <typename LossFn>
Vector finite_diff_flat(LossFn&& loss_of_flat, const Vector& x, double h_base) {
    if (h_base <= 0.0) throw std::invalid_argument("finite_diff_flat: h must be positive");
    Vector g(x.size());
    Vector xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = h_base * std::max(1.0, std::abs(x(i)));
        const double saved = xp(i);
        xp(i) = saved + h;
        const double lp = loss_of_flat(xp);
        xp(i) = saved - h;
        const double lm = loss_of_flat(xp);
        xp(i) = saved;
        g(i) = (lp - lm) / (2.0 * h);
    }
    return g;
}

/// Finite-difference GradBundle for an arbitrary loss over FullParams.
template <typename LossFn>
GradBundle finite_diff_gradient(LossFn&& loss_fn, const FullParams& params, const ModelConfig& cfg,
                                double h_base) {
    auto loss_of_flat = [&](const Vector& x) { return loss_fn(unflatten_params(x, cfg)); };
    const Vector g = finite_diff_flat(loss_of_flat, flatten_params(params), h_base);
    const FullParams shaped = unflatten_params(g, cfg);
    GradBundle out;
    out.theta = shaped.weights.theta;
    out.K_in = shaped.opening.K_in;
    out.b_in = shaped.opening.b_in;
    out.W_out = shaped.closing.W_out;
    out.b_out = shaped.closing.b_out;
    return out;
}

/// Relative error with a unit floor: |a-b| / max(1, |a|, |b|) per entry.
inline double max_rel_error(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("max_rel_error: size mismatch");
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double denom = std::max({1.0, std::abs(a(i)), std::abs(b(i))});
        worst = std::max(worst, std::abs(a(i) - b(i)) / denom);
    }
    return worst;
}

struct ModelGradient {
    double loss = 0.0;
    GradBundle grad;
};

/// Loss and full gradient for one mini-batch, dispatching on architecture.
inline ModelGradient model_gradient(const Matrix& features, const Matrix& targets,
                                    const FullParams& params, const ModelConfig& cfg,
                                    const StepControl& ctrl, EvalCounter& counter) {
    cfg.validate();
    ModelGradient out;
    switch (cfg.arch) {
        case Arch::ResNet: {
            const Matrix u0 = initial_state(features, params, cfg);
            const auto traj = resnet_forward(u0, params.weights, cfg, cfg.state_grid(), counter);
            const Matrix pred = close_layer(traj.final_state(), params.closing);
            out.loss = loss_value(pred, targets, params, cfg.alpha);
            out.grad = resnet_backward(traj, params, cfg, features, pred - targets);
            return out;
        }
        case Arch::Hamiltonian: {
            const Matrix u0 = initial_state(features, params, cfg);
            const auto traj = hamiltonian_forward(u0, params.weights, cfg, cfg.state_grid(), counter);
            const Matrix pred = close_layer(traj.final_state(), params.closing);
            out.loss = loss_value(pred, targets, params, cfg.alpha);
            out.grad = hamiltonian_backward(traj, params, cfg, features, pred - targets);
            return out;
        }
        case Arch::NeuralODE: {
            NodeGradient ng = node_gradient(features, targets, params, cfg, ctrl, counter);
            out.loss = ng.loss;
            out.grad = std::move(ng.grad);
            return out;
        }
    }
    throw std::logic_error("model_gradient: unknown architecture");
}

}  // namespace ctnet
