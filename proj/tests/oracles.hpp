// Test-only reference implementations, kept independent of the library code
// paths they check.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracles {

/// Singular values by one-sided (Hestenes) Jacobi rotations on the columns.
/// Slow and simple; used to freeze conditioning golden values.
inline std::vector<double> jacobi_singular_values(Eigen::MatrixXd m) {
    if (m.rows() < m.cols()) m = m.transpose().eval();
    const Eigen::Index n = m.cols();
    const double eps = 1e-14;
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (Eigen::Index i = 0; i < n - 1; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double a = m.col(i).squaredNorm();
                const double b = m.col(j).squaredNorm();
                const double c = m.col(i).dot(m.col(j));
                if (std::abs(c) <= eps * std::sqrt(a * b)) continue;
                rotated = true;
                const double zeta = (b - a) / (2.0 * c);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                const Eigen::VectorXd ci = m.col(i);
                m.col(i) = cs * ci - sn * m.col(j);
                m.col(j) = sn * ci + cs * m.col(j);
            }
        }
        if (!rotated) break;
    }
    std::vector<double> sv(n);
    for (Eigen::Index i = 0; i < n; ++i) sv[i] = m.col(i).norm();
    std::sort(sv.begin(), sv.end(), std::greater<double>());
    return sv;
}

inline double jacobi_cond2(const Eigen::MatrixXd& m) {
    const auto sv = jacobi_singular_values(m);
    return sv.front() / sv.back();
}

/// Plain forward Euler loop written directly against a step function,
/// independent of the library's trajectory bookkeeping.
template <typename StepFn>
Eigen::MatrixXd reference_euler(Eigen::MatrixXd u, double t0, double dt, int n_steps, StepFn&& f) {
    double t = t0;
    for (int n = 0; n < n_steps; ++n) {
        u = u + dt * f(u, t);
        t += dt;
    }
    return u;
}

/// Composite Simpson quadrature on [a, b].
template <typename Fn>
double simpson(Fn&& f, double a, double b, int intervals) {
    if (intervals % 2 != 0) ++intervals;
    const double h = (b - a) / intervals;
    double sum = f(a) + f(b);
    for (int i = 1; i < intervals; ++i) sum += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

}  // namespace oracles
