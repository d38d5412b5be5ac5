#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace ctnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Deterministic random stream. The mt19937_64 engine is specified
/// bit-for-bit by the standard; the transforms below (53-bit uniform,
/// Box-Muller normal, rejection-sampled index, Fisher-Yates shuffle) are
/// hand-rolled so that identical seeds give identical streams on every
/// platform, which std::normal_distribution and std::shuffle do not
/// guarantee.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform double in [-1, 1).
    double uniform_sym() { return 2.0 * uniform() - 1.0; }

    /// Standard normal via Box-Muller, one value per call (pair cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    /// Unbiased integer in [0, n).
    std::size_t index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::index: n must be positive");
        const std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
        for (;;) {
            const std::uint64_t r = engine_();
            if (r >= threshold) return static_cast<std::size_t>(r % n);
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

    Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev) {
        Matrix m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = stddev * normal();
        return m;
    }

    Vector normal_vector(Eigen::Index n, double stddev) {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = stddev * normal();
        return v;
    }

    Matrix uniform_sym_matrix(Eigen::Index rows, Eigen::Index cols) {
        Matrix m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = uniform_sym();
        return m;
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Cumulative count of layer-function evaluations. Atomic so parallel batch
/// evaluation can share one accumulator.
class EvalCounter {
public:
    void add(long long k) { count_.fetch_add(k, std::memory_order_relaxed); }
    long long value() const { return count_.load(std::memory_order_relaxed); }
    void reset() { count_.store(0, std::memory_order_relaxed); }

private:
    std::atomic<long long> count_{0};
};

}  // namespace ctnet
