#pragma once

#include "ctnet/common.hpp"
#include "ctnet/integrators.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ctnet {

/// Per-row standardization statistics.
struct RowStats {
    Vector mean;
    Vector stddev;
};

struct Dataset {
    Matrix features;  // n_features x n_samples
    Matrix targets;   // m_targets x n_samples
    RowStats feature_stats;
    RowStats target_stats;

    int n_samples() const { return static_cast<int>(features.cols()); }
    int n_features() const { return static_cast<int>(features.rows()); }
    int m_targets() const { return static_cast<int>(targets.rows()); }

    void validate() const {
        if (features.cols() != targets.cols())
            throw std::invalid_argument("Dataset: feature/target sample counts differ");
        if (!features.allFinite() || !targets.allFinite())
            throw std::invalid_argument("Dataset: non-finite entries");
    }
};

inline Matrix gather_columns(const Matrix& m, const std::vector<int>& idx) {
    Matrix out(m.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(idx[j]);
    return out;
}

/// Population mean and standard deviation per row; rows with (numerically)
/// zero spread get stddev clamped to 1 so they standardize to zero.
inline RowStats compute_stats(const Matrix& m) {
    RowStats st;
    const double n = static_cast<double>(m.cols());
    st.mean = m.rowwise().mean();
    st.stddev.resize(m.rows());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double var = (m.row(r).array() - st.mean(r)).square().sum() / n;
        const double sd = std::sqrt(var);
        st.stddev(r) = sd > 1e-12 * (1.0 + std::abs(st.mean(r))) ? sd : 1.0;
    }
    return st;
}

inline Matrix apply_stats(const Matrix& m, const RowStats& st) {
    return ((m.colwise() - st.mean).array().colwise() / st.stddev.array()).matrix();
}

inline Matrix revert_stats(const Matrix& m, const RowStats& st) {
    return ((m.array().colwise() * st.stddev.array()).matrix().colwise() + st.mean).eval();
}

/// Standardize a dataset against its own statistics.
inline Dataset standardize(const Dataset& ds) {
    Dataset out;
    out.feature_stats = compute_stats(ds.features);
    out.target_stats = compute_stats(ds.targets);
    out.features = apply_stats(ds.features, out.feature_stats);
    out.targets = apply_stats(ds.targets, out.target_stats);
    return out;
}

enum class SynthKind { SmoothMap, ParametricODE };

inline std::pair<Matrix, Matrix> smooth_map_matrices(int n_features, int m_targets, std::uint64_t seed) {
    Rng rng(seed);
    const int hidden = 2 * std::max(n_features, m_targets);
    const Matrix b1 = rng.normal_matrix(hidden, n_features, 2.0 / std::sqrt(double(n_features)));
    const Matrix b2 = rng.normal_matrix(m_targets, hidden, 2.0 / std::sqrt(double(hidden)));
    return {b1, b2};
}

inline Matrix smooth_map_targets(const Matrix& y, const Matrix& b1, const Matrix& b2) {
    return (b2 * (b1 * y).array().tanh().matrix()).array().tanh().matrix();
}

inline Vector parametric_ode_initial_state(int m_targets) { return Vector::Ones(m_targets); }

inline std::vector<Matrix> parametric_ode_systems(int n_features, int m_targets, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Matrix> systems(n_features);
    for (int i = 0; i < n_features; ++i)
        systems[i] = rng.normal_matrix(m_targets, m_targets, 1.0 / std::sqrt(double(n_features)));
    return systems;
}

/// State at t = 1 of du/dt = (sum_i y_i M_i) u from the fixed initial state.
inline Vector parametric_ode_target(const Vector& y, const std::vector<Matrix>& systems) {
    if (systems.empty() || y.size() != static_cast<Eigen::Index>(systems.size()))
        throw std::invalid_argument("parametric_ode_target: sample/system size mismatch");
    const Eigen::Index m = systems.front().rows();
    Matrix sys = Matrix::Zero(m, m);
    for (Eigen::Index i = 0; i < y.size(); ++i) sys += y(i) * systems[i];
    const Vector u0 = parametric_ode_initial_state(static_cast<int>(m));
    if (sys.cwiseAbs().maxCoeff() == 0.0) return u0;
    StepControl ctrl;
    ctrl.rtol = 1e-10;
    ctrl.atol = 1e-12;
    auto rhs = [&](double, const Vector& u) { return (sys * u).eval(); };
    return dopri5_solve(rhs, u0, 0.0, 1.0, ctrl, /*keep_dense=*/false).final_state();
}

/// Deterministic synthetic regression tasks. SmoothMap feeds uniform inputs
/// through a fixed two-layer tanh map; ParametricODE integrates a linear
/// ODE whose system matrix depends linearly on the sample and reports the
/// state at t = 1.
inline Dataset synth_surrogate(SynthKind kind, int n_features, int m_targets, int n_samples,
                               std::uint64_t seed) {
    if (n_features < 1 || m_targets < 1 || n_samples < 1)
        throw std::invalid_argument("synth_surrogate: dimensions must be positive");
    Dataset ds;
    if (kind == SynthKind::SmoothMap) {
        auto [b1, b2] = smooth_map_matrices(n_features, m_targets, seed);
        Rng rng(seed + 1);
        ds.features = rng.uniform_sym_matrix(n_features, n_samples);
        ds.targets = smooth_map_targets(ds.features, b1, b2);
        return ds;
    }

    const std::vector<Matrix> systems = parametric_ode_systems(n_features, m_targets, seed);
    Rng yrng(seed + 1);
    ds.features = yrng.uniform_sym_matrix(n_features, n_samples);
    ds.targets.resize(m_targets, n_samples);
    for (int k = 0; k < n_samples; ++k)
        ds.targets.col(k) = parametric_ode_target(ds.features.col(k), systems);
    return ds;
}

enum class CsvOrientation { SamplesAsRows, SamplesAsCols };

namespace detail {

inline Matrix parse_numeric_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        int col_no = 0;
        while (std::getline(ss, cell, ',')) {
            ++col_no;
            const char* begin = cell.c_str();
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            while (end && *end == ' ') ++end;
            if (end == begin || (end && *end != '\0') || !std::isfinite(v))
                throw std::runtime_error("load_csv: " + path + ": non-numeric or non-finite cell at row " +
                                         std::to_string(line_no) + ", column " + std::to_string(col_no));
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("load_csv: " + path + ": ragged row at line " +
                                     std::to_string(line_no) + " (expected " +
                                     std::to_string(rows.front().size()) + " cells, got " +
                                     std::to_string(row.size()) + ")");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("load_csv: " + path + ": empty file");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
    return m;
}

}  // namespace detail

/// Load a features/targets CSV pair and orient it to the internal
/// dimension-by-sample layout.
inline Dataset load_csv(const std::string& features_path, const std::string& targets_path,
                        CsvOrientation orientation) {
    Dataset ds;
    Matrix f = detail::parse_numeric_csv(features_path);
    Matrix t = detail::parse_numeric_csv(targets_path);
    if (orientation == CsvOrientation::SamplesAsRows) {
        f.transposeInPlace();
        t.transposeInPlace();
    }
    ds.features = std::move(f);
    ds.targets = std::move(t);
    if (ds.features.cols() != ds.targets.cols())
        throw std::runtime_error("load_csv: sample count mismatch (" +
                                 std::to_string(ds.features.cols()) + " features vs " +
                                 std::to_string(ds.targets.cols()) + " targets)");
    return ds;
}

struct SplitSpec {
    double train_frac = 0.7;
    double val_frac = 0.2;
    double test_frac = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        if (train_frac < 0 || val_frac < 0 || test_frac < 0)
            throw std::invalid_argument("SplitSpec: negative fraction");
        if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
            throw std::invalid_argument("SplitSpec: fractions must sum to 1");
        if (train_frac == 0.0) throw std::invalid_argument("SplitSpec: empty training split");
    }
};

struct SplitResult {
    Dataset train, val, test;
};

/// Seed-deterministic permutation, contiguous cuts, then standardization of
/// all three splits by statistics computed on the training split only.
inline SplitResult split(const Dataset& ds, const SplitSpec& spec) {
    spec.validate();
    ds.validate();
    const int n = ds.n_samples();
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    Rng rng(spec.seed);
    rng.shuffle(idx);

    int n_train = static_cast<int>(std::llround(spec.train_frac * n));
    int n_val = static_cast<int>(std::llround(spec.val_frac * n));
    n_train = std::max(1, std::min(n_train, n));
    n_val = std::max(0, std::min(n_val, n - n_train));
    const int n_test = n - n_train - n_val;

    auto take = [&](int from, int count) {
        std::vector<int> sel(idx.begin() + from, idx.begin() + from + count);
        Dataset part;
        part.features = gather_columns(ds.features, sel);
        part.targets = gather_columns(ds.targets, sel);
        return part;
    };
    SplitResult out;
    out.train = take(0, n_train);
    out.val = take(n_train, n_val);
    out.test = take(n_train + n_val, n_test);

    const RowStats fstats = compute_stats(out.train.features);
    const RowStats tstats = compute_stats(out.train.targets);
    for (Dataset* part : {&out.train, &out.val, &out.test}) {
        part->feature_stats = fstats;
        part->target_stats = tstats;
        if (part->n_samples() == 0) continue;
        part->features = apply_stats(part->features, fstats);
        part->targets = apply_stats(part->targets, tstats);
    }
    return out;
}

}  // namespace ctnet
