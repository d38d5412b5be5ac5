#include "ctnet/integrators.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace ctnet;

namespace {

Vector scalar(double v) {
    Vector x(1);
    x(0) = v;
    return x;
}

StepControl tight(double rtol, double atol) {
    StepControl c;
    c.rtol = rtol;
    c.atol = atol;
    return c;
}

}  // namespace

TEST_CASE("euler step") {
    const Vector u = scalar(2.0);
    CHECK(euler_step(u, 0.0, 0.5, [](double, const Vector& y) { return (0.0 * y).eval(); })(0) == 2.0);
    // u' = 3u, one step: u (1 + h*3)
    CHECK(euler_step(u, 0.0, 0.1, [](double, const Vector& y) { return (3.0 * y).eval(); })(0) ==
          Catch::Approx(2.0 * 1.3));
    CHECK(euler_step(u, 0.0, 0.5, [](double, const Vector&) { return scalar(4.0); })(0) ==
          Catch::Approx(4.0));
}

TEST_CASE("verlet step basics") {
    const Vector y = scalar(1.0), z = scalar(0.5);
    auto zero = [](double, const Vector& v) { return (0.0 * v).eval(); };
    auto [y1, z1] = verlet_step(y, z, 0.0, 0.1, zero, zero);
    CHECK(y1(0) == 1.0);
    CHECK(z1(0) == 0.5);

    // linear rhs, one step by hand: y' = y + h z; z' = z - h y'
    auto ident = [](double, const Vector& v) { return v; };
    auto [y2, z2] = verlet_step(y, z, 0.0, 0.25, ident, ident);
    CHECK(y2(0) == Catch::Approx(1.0 + 0.25 * 0.5));
    CHECK(z2(0) == Catch::Approx(0.5 - 0.25 * y2(0)));
}

TEST_CASE("verlet conserves the harmonic invariant") {
    // y' = z, z' = -y: exact solution rotates, quadratic invariant y^2 + z^2
    Vector y = scalar(1.0), z = scalar(0.0);
    auto ident = [](double, const Vector& v) { return v; };
    const double h = 0.1;
    const double e0 = 1.0;
    for (int k = 0; k < 1000; ++k) {
        auto [y1, z1] = verlet_step(y, z, k * h, h, ident, ident);
        y = y1;
        z = z1;
    }
    const double e1 = y.squaredNorm() + z.squaredNorm();
    CHECK(std::abs(e1 - e0) / e0 < 1e-3);
    // position stays near the exact rotation (first-order phase accuracy)
    CHECK(std::abs(y(0) - std::cos(1000 * h)) < 0.1);
}

TEST_CASE("verlet forward/reverse round trip is exact") {
    Rng rng(3);
    Vector y = rng.normal_vector(4, 1.0), z = rng.normal_vector(4, 1.0);
    auto ry = [](double t, const Vector& v) { return (v.array().tanh() + t).matrix().eval(); };
    auto rz = [](double t, const Vector& v) { return (v.array().sin() - t).matrix().eval(); };
    const Vector y0 = y, z0 = z;
    auto [y1, z1] = verlet_step(y, z, 0.3, 0.05, ry, rz);
    auto [yb, zb] = verlet_step_reverse(y1, z1, 0.3, 0.05, ry, rz);
    CHECK((yb - y0).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((zb - z0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dopri5 solves u' = u to the exponential") {
    auto rhs = [](double, const Vector& y) { return y; };
    const SolveRecord rec = dopri5_solve(rhs, scalar(1.0), 0.0, 1.0, tight(1e-8, 1e-8));
    CHECK(std::abs(rec.final_state()(0) - std::exp(1.0)) < 1e-6);
}

TEST_CASE("dopri5 crosses a zero field in one giant step") {
    auto rhs = [](double, const Vector& y) { return (0.0 * y).eval(); };
    const SolveRecord rec = dopri5_solve(rhs, scalar(4.0), 0.0, 10.0, tight(1e-8, 1e-8));
    CHECK(rec.n_accepted == 1);
    CHECK(rec.n_rejected == 0);
    CHECK(rec.final_state()(0) == 4.0);
}

TEST_CASE("dopri5 integrates cos to zero net area over (0, pi)") {
    auto rhs = [](double t, const Vector& y) { return (0.0 * y).array().matrix() + scalar(std::cos(t)); };
    const SolveRecord rec = dopri5_solve(rhs, scalar(0.25), 0.0, 3.14159265358979323846, tight(1e-10, 1e-12));
    CHECK(std::abs(rec.final_state()(0) - 0.25) < 1e-8);
}

TEST_CASE("dopri5 reverse run inverts the exponential") {
    auto rhs = [](double, const Vector& y) { return y; };
    const SolveRecord rec = dopri5_solve_reverse(rhs, scalar(std::exp(1.0)), 1.0, 0.0, tight(1e-8, 1e-8));
    CHECK(std::abs(rec.final_state()(0) - 1.0) < 1e-6);

    // forward-then-backward round trip on a nonlinear field
    auto field = [](double t, const Vector& y) {
        return (y.array().tanh() * std::sin(3.0 * t + 1.0)).matrix().eval();
    };
    Rng rng(0);
    const Vector u0 = rng.normal_vector(6, 1.0);
    const Vector uT = dopri5_solve(field, u0, 0.0, 1.0, tight(1e-8, 1e-10)).final_state();
    const Vector back = dopri5_solve_reverse(field, uT, 1.0, 0.0, tight(1e-8, 1e-10)).final_state();
    CHECK((back - u0).norm() / u0.norm() < 1e-5);
}

TEST_CASE("dopri5 global error scales linearly with the tolerance") {
    auto rhs = [](double, const Vector& y) { return y; };
    std::vector<double> log_tol, log_err;
    for (double tol : {1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10}) {
        const SolveRecord rec = dopri5_solve(rhs, scalar(1.0), 0.0, 1.0, tight(tol, tol * 1e-2));
        const double err = std::abs(rec.final_state()(0) - std::exp(1.0));
        log_tol.push_back(std::log10(tol));
        log_err.push_back(std::log10(std::max(err, 1e-16)));
    }
    // least-squares slope of log err against log tol
    const int n = static_cast<int>(log_tol.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sx += log_tol[i];
        sy += log_err[i];
        sxx += log_tol[i] * log_tol[i];
        sxy += log_tol[i] * log_err[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope > 0.9);
    CHECK(slope < 1.1);
}

TEST_CASE("euler halves the global error when the step is halved") {
    auto rhs = [](double, const Vector& y) { return y; };
    auto global_error = [&](int steps) {
        Vector u = scalar(1.0);
        const double h = 1.0 / steps;
        for (int k = 0; k < steps; ++k) u = euler_step(u, k * h, h, rhs);
        return std::abs(u(0) - std::exp(1.0));
    };
    const double e1 = global_error(100);
    const double e2 = global_error(200);
    const double slope = std::log2(e1 / e2);
    CHECK(slope > 0.9);
    CHECK(slope < 1.1);
}

TEST_CASE("FSAL accounting: six fresh evaluations per attempted step") {
    auto rhs = [](double t, const Vector& y) { return (std::sin(5.0 * t) * y).eval(); };
    const SolveRecord rec = dopri5_solve(rhs, scalar(1.0), 0.0, 2.0, tight(1e-9, 1e-11));
    CHECK(rec.n_rhs_evals == 1 + 6 * (rec.n_accepted + rec.n_rejected));
    CHECK(rec.n_rejected >= 1);  // the optimistic first step must shrink
}

TEST_CASE("dopri5 failure modes carry partial records") {
    auto rhs = [](double, const Vector& y) { return y; };
    StepControl cap = tight(1e-10, 1e-12);
    cap.max_steps = 3;
    try {
        dopri5_solve(rhs, scalar(1.0), 0.0, 50.0, cap);
        FAIL("expected SolverError");
    } catch (const SolverError& e) {
        CHECK(e.partial_record.times.size() >= 1);
        CHECK(e.partial_record.n_rhs_evals > 0);
    }

    // blow-up forces the step below h_min
    auto explode = [](double t, const Vector& y) { return (y.array().square() / (1.0 - t)).matrix().eval(); };
    StepControl floor_ctl = tight(1e-8, 1e-10);
    floor_ctl.h_min = 1e-3;
    CHECK_THROWS_AS(dopri5_solve(explode, scalar(10.0), 0.0, 1.0, floor_ctl), SolverError);
}

TEST_CASE("dense output interpolates to fourth order") {
    auto rhs = [](double, const Vector& y) { return y; };
    const SolveRecord rec = dopri5_solve(rhs, scalar(1.0), 0.0, 1.0, tight(1e-8, 1e-10));
    for (double t : {0.05, 0.33, 0.5, 0.77, 0.99}) {
        CHECK(std::abs(rec.sample(t)(0) - std::exp(t)) < 1e-6);
    }
    CHECK_THROWS_AS(rec.sample(1.5), std::invalid_argument);

    std::vector<double> wanted{0.25, 0.5, 0.75};
    const SolveRecord rec2 = dopri5_solve(rhs, scalar(1.0), 0.0, 1.0, tight(1e-8, 1e-10), true, &wanted);
    REQUIRE(rec2.dense_states.size() == 3);
    CHECK(std::abs(rec2.dense_states[1](0) - std::exp(0.5)) < 1e-6);
}

TEST_CASE("step control validation") {
    StepControl c;
    c.rtol = -1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = StepControl{};
    c.h_min = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = StepControl{};
    c.max_steps = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    CHECK_THROWS_AS(dopri5_solve([](double, const Vector& y) { return y; }, scalar(1.0), 1.0, 1.0,
                                 StepControl{}),
                    std::invalid_argument);
}
