#pragma once

#include "ctnet/common.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace ctnet {

enum class BasisFamily { Monomial, Legendre, None };

inline const char* to_string(BasisFamily f) {
    switch (f) {
        case BasisFamily::Monomial: return "monomial";
        case BasisFamily::Legendre: return "legendre";
        case BasisFamily::None: return "none";
    }
    return "?";
}

/// Polynomial family plus highest degree. degree k means k+1 basis
/// functions (indices 0..k). For None the degree is ignored and every time
/// step carries an independent weight vector.
struct WeightBasis {
    BasisFamily family = BasisFamily::Legendre;
    int degree = 3;

    int count() const { return degree + 1; }
    bool polynomial() const { return family != BasisFamily::None; }

    void validate() const {
        if (polynomial() && degree < 0)
            throw std::invalid_argument("WeightBasis: degree must be >= 0");
    }
};

/// Ordered evaluation times inside a normalization interval [t_begin, t_end].
/// The last point may fall short of t_end (ResNet weight grids stop one step
/// before the horizon) but normalization always uses the full interval.
struct TimeGrid {
    double t_begin = 0.0;
    double t_end = 1.0;
    std::vector<double> points;

    static TimeGrid equispaced(double a, double b, int n) {
        if (n < 1) throw std::invalid_argument("TimeGrid: need at least one point");
        TimeGrid g;
        g.t_begin = a;
        g.t_end = b;
        g.points.resize(n);
        if (n == 1) {
            g.points[0] = a;
        } else {
            const double h = (b - a) / (n - 1);
            for (int i = 0; i < n; ++i) g.points[i] = a + h * i;
            g.points[n - 1] = b;  // exact endpoint
        }
        g.validate();
        return g;
    }

    int size() const { return static_cast<int>(points.size()); }

    double span() const { return t_end - t_begin; }

    /// Map t to s in [0, 1]. Tolerates round-off just outside the interval.
    double normalized(double t) const {
        if (span() == 0.0) {
            if (size() > 1) throw std::invalid_argument("TimeGrid: degenerate interval with multiple points");
            return 0.0;
        }
        const double s = (t - t_begin) / span();
        const double tol = 1e-9;
        if (s < -tol || s > 1.0 + tol)
            throw std::invalid_argument("TimeGrid: time " + std::to_string(t) + " outside [" +
                                        std::to_string(t_begin) + ", " + std::to_string(t_end) + "]");
        return std::min(std::max(s, 0.0), 1.0);
    }

    /// Index of the grid point equal to t, or -1.
    int exact_index(double t) const {
        const double tol = 1e-12 * (1.0 + std::abs(span()));
        for (int j = 0; j < size(); ++j)
            if (std::abs(points[j] - t) <= tol) return j;
        return -1;
    }

    void validate() const {
        if (points.empty()) throw std::invalid_argument("TimeGrid: empty");
        if (span() == 0.0 && size() > 1)
            throw std::invalid_argument("TimeGrid: degenerate interval with multiple points");
        if (points.front() != t_begin)
            throw std::invalid_argument("TimeGrid: first point must equal t_begin");
        const double dir = span() >= 0.0 ? 1.0 : -1.0;
        for (int j = 1; j < size(); ++j)
            if ((points[j] - points[j - 1]) * dir <= 0.0)
                throw std::invalid_argument("TimeGrid: points must be strictly increasing");
        if ((points.back() - t_end) * dir > 1e-12 * (1.0 + std::abs(span())))
            throw std::invalid_argument("TimeGrid: points exceed interval end");
    }

    bool equispaced(double rel_tol = 1e-9) const {
        if (size() < 3) return true;
        const double h0 = points[1] - points[0];
        for (int j = 2; j < size(); ++j)
            if (std::abs((points[j] - points[j - 1]) - h0) > rel_tol * std::abs(h0)) return false;
        return true;
    }
};

/// s^i on normalized time.
inline double eval_monomial(int i, double t, const TimeGrid& grid) {
    if (i < 0) throw std::invalid_argument("eval_monomial: negative index");
    if (i == 0) return 1.0;
    const double s = grid.normalized(t);
    double p = 1.0;
    for (int k = 0; k < i; ++k) p *= s;
    return p;
}

/// Shifted Legendre P_i(2s - 1) on normalized time, by the Bonnet
/// three-term recurrence.
inline double eval_legendre(int i, double t, const TimeGrid& grid) {
    if (i < 0) throw std::invalid_argument("eval_legendre: negative index");
    if (i == 0) return 1.0;
    const double x = 2.0 * grid.normalized(t) - 1.0;
    double pm1 = 1.0;
    double p = x;
    for (int n = 1; n < i; ++n) {
        const double pn = ((2 * n + 1) * x * p - n * pm1) / (n + 1);
        pm1 = p;
        p = pn;
    }
    return p;
}

inline double eval_basis(const WeightBasis& basis, int i, double t, const TimeGrid& grid) {
    switch (basis.family) {
        case BasisFamily::Monomial: return eval_monomial(i, t, grid);
        case BasisFamily::Legendre: return eval_legendre(i, t, grid);
        case BasisFamily::None:
            throw std::invalid_argument("eval_basis: non-parameterized family has no basis functions");
    }
    return 0.0;
}

/// Column p(t) of all d basis evaluations at one time. Legendre fills the
/// whole column in a single recurrence pass.
inline Vector basis_column(const WeightBasis& basis, double t, const TimeGrid& grid) {
    basis.validate();
    if (!basis.polynomial())
        throw std::invalid_argument("basis_column: non-parameterized family has no basis matrix");
    const int d = basis.count();
    Vector p(d);
    p(0) = 1.0;
    if (d == 1) return p;
    if (basis.family == BasisFamily::Monomial) {
        const double s = grid.normalized(t);
        for (int i = 1; i < d; ++i) p(i) = p(i - 1) * s;
    } else {
        const double x = 2.0 * grid.normalized(t) - 1.0;
        p(1) = x;
        for (int n = 1; n + 1 < d; ++n) p(n + 1) = ((2 * n + 1) * x * p(n) - n * p(n - 1)) / (n + 1);
    }
    return p;
}

/// A with A(i, j) = p_i(t_j); d rows, N columns. The Vandermonde matrices of
/// the conditioning analysis are the transposes and share singular values.
inline Matrix build_basis_matrix(const WeightBasis& basis, const TimeGrid& grid) {
    grid.validate();
    if (!basis.polynomial())
        throw std::invalid_argument("build_basis_matrix: non-parameterized family has no basis matrix");
    const int d = basis.count();
    const int n = grid.size();
    Matrix a(d, n);
    for (int j = 0; j < n; ++j) a.col(j) = basis_column(basis, grid.points[j], grid);
    return a;
}

/// 2-norm condition number sigma_max / sigma_min; +inf when the matrix is
/// numerically rank deficient.
inline double condition_number(const Matrix& m) {
    if (m.size() == 0) throw std::invalid_argument("condition_number: empty matrix");
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    const double cutoff = std::numeric_limits<double>::epsilon() * smax *
                          static_cast<double>(std::max(m.rows(), m.cols()));
    if (smin <= cutoff) return std::numeric_limits<double>::infinity();
    return smax / smin;
}

struct ConditionEntry {
    BasisFamily family;
    int degree;
    double cond2;
};

/// One row per (family, degree). Degrees at or above the number of grid
/// points produce rank-deficient matrices and get the infinity sentinel
/// without forming the matrix.
inline std::vector<ConditionEntry> conditioning_report(const std::vector<BasisFamily>& families,
                                                       int degree_from, int degree_to,
                                                       const TimeGrid& grid) {
    if (degree_from < 0 || degree_to < degree_from)
        throw std::invalid_argument("conditioning_report: bad degree range");
    std::vector<ConditionEntry> rows;
    for (BasisFamily f : families) {
        if (f == BasisFamily::None)
            throw std::invalid_argument("conditioning_report: non-parameterized family has no matrix");
        for (int deg = degree_from; deg <= degree_to; ++deg) {
            if (deg >= grid.size()) {
                rows.push_back({f, deg, std::numeric_limits<double>::infinity()});
                continue;
            }
            const Matrix a = build_basis_matrix({f, deg}, grid);
            rows.push_back({f, deg, condition_number(a)});
        }
    }
    return rows;
}

}  // namespace ctnet
