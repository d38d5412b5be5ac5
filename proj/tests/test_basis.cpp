#include "ctnet/basis.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace ctnet;

namespace {
const TimeGrid kUnit12 = TimeGrid::equispaced(0.0, 1.0, 12);
}

TEST_CASE("monomial evaluation on normalized time") {
    const TimeGrid g = TimeGrid::equispaced(0.0, 2.0, 5);
    CHECK(eval_monomial(0, 0.73, g) == 1.0);
    CHECK(eval_monomial(1, 2.0, g) == 1.0);                   // s = 1 at the horizon
    CHECK(eval_monomial(3, 1.0, g) == Catch::Approx(0.125));  // s = 0.5
    CHECK_THROWS_AS(eval_monomial(-1, 0.5, g), std::invalid_argument);
    CHECK_THROWS_AS(eval_monomial(1, 5.0, g), std::invalid_argument);  // outside horizon
}

TEST_CASE("shifted Legendre evaluation") {
    const TimeGrid g = TimeGrid::equispaced(0.0, 1.0, 3);
    CHECK(eval_legendre(0, 0.37, g) == 1.0);
    CHECK(eval_legendre(1, 0.5, g) == Catch::Approx(0.0).margin(1e-15));
    CHECK(eval_legendre(2, 1.0, g) == Catch::Approx(1.0));
    CHECK(eval_legendre(2, 0.5, g) == Catch::Approx(-0.5));
    CHECK(eval_legendre(3, 0.25, g) == Catch::Approx(0.4375));
    CHECK_THROWS_AS(eval_legendre(-2, 0.5, g), std::invalid_argument);
}

TEST_CASE("degenerate grids are rejected") {
    TimeGrid g;
    g.t_begin = g.t_end = 1.0;
    g.points = {1.0, 1.0};
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);

    TimeGrid single;
    single.t_begin = single.t_end = 1.0;
    single.points = {1.0};
    CHECK_NOTHROW(single.validate());
    CHECK(single.normalized(1.0) == 0.0);
}

TEST_CASE("basis matrix entries and shape") {
    const TimeGrid g2 = TimeGrid::equispaced(0.0, 1.0, 2);

    const Matrix mono = build_basis_matrix({BasisFamily::Monomial, 1}, g2);
    CHECK(mono.rows() == 2);
    CHECK(mono.cols() == 2);
    CHECK(mono(0, 0) == 1.0);
    CHECK(mono(0, 1) == 1.0);
    CHECK(mono(1, 0) == 0.0);
    CHECK(mono(1, 1) == 1.0);

    const Matrix leg = build_basis_matrix({BasisFamily::Legendre, 1}, g2);
    CHECK(leg(1, 0) == -1.0);
    CHECK(leg(1, 1) == 1.0);
    CHECK(leg.row(0).isOnes());

    const Matrix m3 = build_basis_matrix({BasisFamily::Monomial, 3}, kUnit12);
    CHECK(m3.rows() == 4);
    CHECK(m3.cols() == 12);
    CHECK(m3(3, 11) == Catch::Approx(1.0));
    CHECK(m3.row(0).isOnes());

    CHECK_THROWS_AS(build_basis_matrix({BasisFamily::None, 0}, g2), std::invalid_argument);
}

TEST_CASE("basis matrix construction is deterministic") {
    const WeightBasis b{BasisFamily::Legendre, 5};
    const Matrix a1 = build_basis_matrix(b, kUnit12);
    const Matrix a2 = build_basis_matrix(b, kUnit12);
    CHECK(a1 == a2);  // bit-identical
}

TEST_CASE("condition number basics") {
    CHECK(condition_number(Matrix::Identity(4, 4)) == Catch::Approx(1.0));
    Matrix rank_deficient(2, 3);
    rank_deficient << 1, 2, 3, 2, 4, 6;
    CHECK(std::isinf(condition_number(rank_deficient)));
    CHECK_THROWS_AS(condition_number(Matrix()), std::invalid_argument);
}

TEST_CASE("conditioning golden values, degree 3 on 12 points") {
    // frozen from the one-sided Jacobi oracle; cross-checked here on every run
    const Matrix vm = build_basis_matrix({BasisFamily::Monomial, 3}, kUnit12);
    const Matrix vl = build_basis_matrix({BasisFamily::Legendre, 3}, kUnit12);
    const double km = condition_number(vm);
    const double kl = condition_number(vl);
    CHECK(km == Catch::Approx(102.0113014842613).epsilon(1e-10));
    CHECK(kl == Catch::Approx(2.288602946190221).epsilon(1e-10));
    CHECK(km == Catch::Approx(oracles::jacobi_cond2(vm)).epsilon(1e-9));
    CHECK(kl == Catch::Approx(oracles::jacobi_cond2(vl)).epsilon(1e-9));
    CHECK(kl < km);
}

TEST_CASE("conditioning report rows and sentinels") {
    const TimeGrid g = TimeGrid::equispaced(0.0, 1.0, 4);
    const auto deg0 = conditioning_report({BasisFamily::Monomial}, 0, 0, g);
    REQUIRE(deg0.size() == 1);
    CHECK(deg0[0].cond2 == Catch::Approx(1.0));

    const auto leg1 =
        conditioning_report({BasisFamily::Legendre}, 1, 1, TimeGrid::equispaced(0.0, 1.0, 2));
    CHECK(leg1[0].cond2 == Catch::Approx(1.0));

    // degree >= N is rank deficient: sentinel rows, no throw
    const auto sentinel = conditioning_report({BasisFamily::Monomial}, 3, 5, g);
    REQUIRE(sentinel.size() == 3);
    CHECK(std::isfinite(sentinel[0].cond2));
    CHECK(std::isinf(sentinel[1].cond2));
    CHECK(std::isinf(sentinel[2].cond2));

    CHECK_THROWS_AS(conditioning_report({BasisFamily::None}, 0, 1, g), std::invalid_argument);
    CHECK_THROWS_AS(conditioning_report({BasisFamily::Monomial}, 2, 1, g), std::invalid_argument);
}

TEST_CASE("monomial-to-Legendre conditioning ratio grows with degree") {
    const TimeGrid g = TimeGrid::equispaced(0.0, 1.0, 50);
    double prev_ratio = 0.0;
    for (int deg = 3; deg <= 10; ++deg) {
        const double km = condition_number(build_basis_matrix({BasisFamily::Monomial, deg}, g));
        const double kl = condition_number(build_basis_matrix({BasisFamily::Legendre, deg}, g));
        const double ratio = km / kl;
        CHECK(ratio > prev_ratio);
        prev_ratio = ratio;
    }
}

TEST_CASE("Legendre conditioning never exceeds monomial conditioning") {
    for (int n : {12, 25, 50}) {
        const TimeGrid g = TimeGrid::equispaced(0.0, 1.0, n);
        double prev_km = 0.0, prev_kl = 0.0;
        for (int deg = 2; deg <= 10; ++deg) {
            const double km = condition_number(build_basis_matrix({BasisFamily::Monomial, deg}, g));
            const double kl = condition_number(build_basis_matrix({BasisFamily::Legendre, deg}, g));
            CHECK(kl <= km);
            // kappa is monotone in the degree within each family
            CHECK(km >= prev_km);
            CHECK(kl >= prev_kl);
            prev_km = km;
            prev_kl = kl;
        }
    }
}

TEST_CASE("shifted Legendre orthogonality under midpoint quadrature") {
    const TimeGrid unit = TimeGrid::equispaced(0.0, 1.0, 2);
    const int q = 10000;
    for (int i = 0; i <= 6; ++i) {
        for (int j = i; j <= 6; ++j) {
            double acc = 0.0;
            for (int k = 0; k < q; ++k) {
                const double s = (k + 0.5) / q;
                acc += eval_legendre(i, s, unit) * eval_legendre(j, s, unit);
            }
            acc /= q;
            if (i == j)
                CHECK(acc == Catch::Approx(1.0 / (2 * i + 1)).margin(1e-6));
            else
                CHECK(std::abs(acc) < 1e-6);
        }
    }
}

TEST_CASE("monomial and Legendre spans coincide") {
    // any monomial-coefficient polynomial has an exact Legendre representation
    Rng rng(7);
    const TimeGrid unit = TimeGrid::equispaced(0.0, 1.0, 2);
    for (int degree : {1, 3, 6}) {
        const int d = degree + 1;
        const Vector cm = rng.normal_vector(d, 1.0);
        const int samples = 100;
        Matrix legendre_vals(samples, d);
        Vector target(samples);
        for (int k = 0; k < samples; ++k) {
            const double s = double(k) / (samples - 1);
            double f = 0.0, sp = 1.0;
            for (int i = 0; i < d; ++i) {
                f += cm(i) * sp;
                sp *= s;
            }
            target(k) = f;
            for (int i = 0; i < d; ++i) legendre_vals(k, i) = eval_legendre(i, s, unit);
        }
        const Vector cl = legendre_vals.colPivHouseholderQr().solve(target);
        CHECK((legendre_vals * cl - target).norm() < 1e-10);
    }
}
