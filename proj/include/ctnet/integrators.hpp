#pragma once

#include "ctnet/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace ctnet {

/// Adaptive step controller settings. h_init/h_max of zero pick defaults
/// from the integration span.
struct StepControl {
    double rtol = 1e-6;
    double atol = 1e-8;
    double h_init = 0.0;
    double h_min = 1e-12;
    double h_max = 0.0;
    long max_steps = 100000;
    double safety = 0.9;

    void validate() const {
        if (rtol <= 0.0 || atol <= 0.0) throw std::invalid_argument("StepControl: tolerances must be positive");
        if (h_min <= 0.0) throw std::invalid_argument("StepControl: h_min must be positive");
        if (h_max != 0.0 && h_max < h_min) throw std::invalid_argument("StepControl: h_max < h_min");
        if (max_steps <= 0) throw std::invalid_argument("StepControl: max_steps must be positive");
        if (safety <= 0.0 || safety >= 1.0) throw std::invalid_argument("StepControl: safety must be in (0,1)");
    }
};

/// Interpolation coefficients of one accepted step (Hairer's contd5 form).
struct DenseSegment {
    double t0 = 0.0;
    double h = 0.0;
    Vector r1, r2, r3, r4, r5;

    Vector eval(double t) const {
        const double theta = (t - t0) / h;
        const double theta1 = 1.0 - theta;
        return r1 + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)));
    }
};

struct SolveRecord {
    std::vector<double> times;           // accepted step times, includes t_start
    std::vector<Vector> states;          // states at those times
    std::vector<DenseSegment> segments;  // one per accepted step when dense output is kept
    std::vector<Vector> dense_states;    // evaluations at the requested dense_at times
    long long n_rhs_evals = 0;
    long long n_accepted = 0;
    long long n_rejected = 0;

    const Vector& final_state() const {
        if (states.empty()) throw std::logic_error("SolveRecord: empty");
        return states.back();
    }

    /// 4th-order dense-output evaluation anywhere inside the solved span.
    Vector sample(double t) const {
        if (segments.empty()) throw std::logic_error("SolveRecord: no dense output stored");
        const double dir = segments.front().h >= 0.0 ? 1.0 : -1.0;
        const double lo = segments.front().t0;
        const double hi = segments.back().t0 + segments.back().h;
        const double tol = 1e-9 * (1.0 + std::abs(hi - lo));
        if ((t - lo) * dir < -tol || (t - hi) * dir > tol)
            throw std::invalid_argument("SolveRecord::sample: time outside solved span");
        // binary search for the segment containing t
        std::size_t a = 0, b = segments.size() - 1;
        while (a < b) {
            const std::size_t mid = (a + b + 1) / 2;
            if ((t - segments[mid].t0) * dir >= 0.0)
                a = mid;
            else
                b = mid - 1;
        }
        return segments[a].eval(t);
    }
};

/// Integration failure carrying whatever was computed before the failure.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, SolveRecord partial)
        : std::runtime_error(what), partial_record(std::move(partial)) {}
    SolveRecord partial_record;
};

template <typename State, typename Rhs>
State euler_step(const State& u, double t, double h, Rhs&& rhs) {
    return u + h * rhs(t, u);
}

/// Staggered Verlet update: the position half-state advances on the current
/// momentum, the momentum on the already-updated position.
template <typename State, typename RhsY, typename RhsZ>
std::pair<State, State> verlet_step(const State& y, const State& z, double t, double h, RhsY&& rhs_y,
                                    RhsZ&& rhs_z) {
    State y1 = y + h * rhs_y(t, z);
    State z1 = z - h * rhs_z(t, y1);
    return {std::move(y1), std::move(z1)};
}

/// Exact algebraic inverse of verlet_step: the same evaluations in reverse
/// order with flipped signs, so a forward/backward pair cancels in floating
/// point.
template <typename State, typename RhsY, typename RhsZ>
std::pair<State, State> verlet_step_reverse(const State& y1, const State& z1, double t, double h,
                                            RhsY&& rhs_y, RhsZ&& rhs_z) {
    State z = z1 + h * rhs_z(t, y1);
    State y = y1 - h * rhs_y(t, z);
    return {std::move(y), std::move(z)};
}

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                        b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense-output coefficients
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

}  // namespace detail

/// Adaptive Dormand-Prince 5(4) solve of y' = rhs(t, y) from ta to tb
/// (either direction). Error control uses the mixed absolute/relative RMS
/// norm; steps are accepted at err <= 1 and resized by
/// h * clamp(safety * err^(-1/5), 0.2, 5.0). The last stage of an accepted
/// step seeds the next one (FSAL), so each attempted step costs six fresh
/// rhs evaluations on top of the single start-up evaluation.
template <typename Rhs>
SolveRecord dopri5_solve(Rhs&& rhs, const Vector& y0, double ta, double tb, const StepControl& ctrl,
                         bool keep_dense = true, const std::vector<double>* dense_at = nullptr) {
    ctrl.validate();
    if (ta == tb) throw std::invalid_argument("dopri5_solve: empty time span");
    using namespace detail;

    const double dir = tb > ta ? 1.0 : -1.0;
    const double span = std::abs(tb - ta);
    const double hmax = ctrl.h_max > 0.0 ? ctrl.h_max : span;
    // optimistic start: try the whole span, let the controller shrink it
    double h = dir * std::min(ctrl.h_init > 0.0 ? ctrl.h_init : span, hmax);

    SolveRecord rec;
    rec.times.push_back(ta);
    rec.states.push_back(y0);

    double t = ta;
    Vector y = y0;
    Vector k1 = rhs(t, y);
    rec.n_rhs_evals += 1;

    Vector k2, k3, k4, k5, k6, k7, y1, err;
    long attempts = 0;
    bool last = false;

    while (true) {
        if ((t + h - tb) * dir >= 0.0) {
            h = tb - t;
            last = true;
        } else {
            last = false;
        }
        if (++attempts > ctrl.max_steps)
            throw SolverError("dopri5_solve: max_steps exceeded", std::move(rec));

        k2 = rhs(t + c2 * h, y + h * (a21 * k1));
        k3 = rhs(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
        k4 = rhs(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        k5 = rhs(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        k6 = rhs(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        y1 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        k7 = rhs(t + h, y1);
        rec.n_rhs_evals += 6;

        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < err.size(); ++i) {
            const double scale = ctrl.atol + ctrl.rtol * std::max(std::abs(y(i)), std::abs(y1(i)));
            const double q = err(i) / scale;
            sum += q * q;
        }
        const double err_norm = std::sqrt(sum / static_cast<double>(err.size()));

        double factor = err_norm > 0.0 ? ctrl.safety * std::pow(err_norm, -0.2) : 5.0;
        factor = std::clamp(factor, 0.2, 5.0);

        if (err_norm <= 1.0) {
            rec.n_accepted += 1;
            if (keep_dense || dense_at) {
                DenseSegment seg;
                seg.t0 = t;
                seg.h = h;
                seg.r1 = y;
                seg.r2 = y1 - y;
                seg.r3 = h * k1 - seg.r2;
                seg.r4 = seg.r2 - h * k7 - seg.r3;
                seg.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
                rec.segments.push_back(std::move(seg));
            }
            t = last ? tb : t + h;
            y.swap(y1);
            k1.swap(k7);  // FSAL
            rec.times.push_back(t);
            rec.states.push_back(y);
            if (last) break;
        } else {
            rec.n_rejected += 1;
            last = false;
        }

        h *= factor;
        if (std::abs(h) > hmax) h = dir * hmax;
        if (std::abs(h) < ctrl.h_min)
            throw SolverError("dopri5_solve: step size underflow (stiffness?)", std::move(rec));
    }

    if (dense_at) {
        rec.dense_states.reserve(dense_at->size());
        for (double td : *dense_at) rec.dense_states.push_back(rec.sample(td));
        if (!keep_dense) rec.segments.clear();
    }
    return rec;
}

/// Backward-in-time solve, used by the adjoint pass.
template <typename Rhs>
SolveRecord dopri5_solve_reverse(Rhs&& rhs, const Vector& y_end, double t_end, double t_start,
                                 const StepControl& ctrl, bool keep_dense = false) {
    if (!((t_end > t_start) || (t_end < t_start)))
        throw std::invalid_argument("dopri5_solve_reverse: empty time span");
    return dopri5_solve(std::forward<Rhs>(rhs), y_end, t_end, t_start, ctrl, keep_dense);
}

}  // namespace ctnet
