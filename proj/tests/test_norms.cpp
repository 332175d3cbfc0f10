#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <fieldcov/core.hpp>
#include <fieldcov/norms.hpp>
#include <fieldcov/rng.hpp>

#include "testutil.hpp"

using namespace fieldcov;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("lattice norm closed form at q = 100") {
    const int q = 100;
    std::vector<double> v(q);
    for (int i = 1; i <= q; ++i) v[i - 1] = static_cast<double>(i) / q;
    const double expect =
        std::sqrt((q + 1.0) * (2.0 * q + 1.0) / (6.0 * q * q));
    CHECK_THAT(lattice_norm(v), WithinRel(expect, 1e-14));
    CHECK_THAT(lattice_norm(v) * lattice_norm(v), WithinAbs(0.33835, 1e-5));
}

TEST_CASE("lattice norm rejects the empty vector") {
    CHECK_THROWS_AS(lattice_norm({}), config_error);
}

TEST_CASE("lattice norm converges to the L2 norm of the identity") {
    double prev = 1e9;
    for (int q : {10, 20, 40, 80}) {
        std::vector<double> v(static_cast<std::size_t>(q));
        for (int i = 1; i <= q; ++i)
            v[static_cast<std::size_t>(i - 1)] = static_cast<double>(i) / q;
        const double err = std::abs(lattice_norm(v) - std::sqrt(1.0 / 3.0));
        CHECK(err < prev);
        prev = err;
    }
}

TEST_CASE("random location norm averages over the realized count") {
    CHECK_THAT(random_location_norm({3.0, 4.0}),
               WithinRel(std::sqrt(12.5), 1e-15));
    CHECK(random_location_norm({}) == 0.0);
}

TEST_CASE("random location norm RMS error shrinks like the root of N") {
    // Values f(t) = t at uniform points approximate the L2 norm 1/sqrt(3).
    RngStream rng(31);
    auto rms_err = [&](int n, int reps) {
        double s = 0.0;
        for (int r = 0; r < reps; ++r) {
            std::vector<double> v(static_cast<std::size_t>(n));
            for (auto& x : v) x = rng.uniform();
            const double e = random_location_norm(v) - std::sqrt(1.0 / 3.0);
            s += e * e;
        }
        return std::sqrt(s / reps);
    };
    const double e100 = rms_err(100, 200);
    const double e10000 = rms_err(10000, 200);
    // A factor of 100 in N buys about a factor of 10 in RMS error.
    CHECK(e10000 < e100 / 5.0);
    CHECK(e10000 > e100 / 20.0);
}

TEST_CASE("cell averaged norm pools entries within a cell") {
    // Two values in one cell average to 2; the divisor is the cell count.
    CellAverageSpec spec(1, 50);  // 12 cells
    std::vector<std::vector<double>> pts{{0.01}, {0.02}};
    std::vector<double> v{1.0, 3.0};
    CHECK_THAT(cell_average_norm(v, pts, spec),
               WithinRel(std::sqrt(4.0 / 12.0), 1e-14));
}

TEST_CASE("cell averaged norm of a constant occupying m cells") {
    CellAverageSpec spec(1, 50);  // 12 cells
    // Constant 2.5 in three separate cells.
    std::vector<std::vector<double>> pts{{0.01}, {0.5}, {0.99}};
    std::vector<double> v{2.5, 2.5, 2.5};
    CHECK_THAT(cell_average_norm(v, pts, spec),
               WithinRel(2.5 * std::sqrt(3.0 / 12.0), 1e-14));
}

TEST_CASE("cell averaged norm edge cases") {
    CellAverageSpec spec(2, 100);
    CHECK(cell_average_norm({}, {}, spec) == 0.0);
    CHECK_THROWS_AS(
        cell_average_norm({1.0}, {{1.5, 0.5}}, spec), data_error);
    CHECK_THROWS_AS(cell_average_norm({1.0, 2.0}, {{0.5, 0.5}}, spec),
                    config_error);
}

TEST_CASE("norms are absolutely homogeneous and bounded by the sup") {
    RngStream rng(17);
    std::vector<double> v(40);
    for (auto& x : v) x = rng.normal();
    double mx = 0.0;
    for (double x : v) mx = std::max(mx, std::abs(x));
    const double c = -2.25;
    std::vector<double> cv(v);
    for (auto& x : cv) x *= c;
    CHECK_THAT(lattice_norm(cv), WithinRel(std::abs(c) * lattice_norm(v),
                                           1e-13));
    CHECK_THAT(random_location_norm(cv),
               WithinRel(std::abs(c) * random_location_norm(v), 1e-13));
    CHECK(lattice_norm(v) <= mx + 1e-15);
    CHECK(random_location_norm(v) <= mx + 1e-15);

    CellAverageSpec spec(1, 60);
    std::vector<std::vector<double>> pts(40);
    for (auto& pt : pts) pt = {rng.uniform()};
    CHECK_THAT(cell_average_norm(cv, pts, spec),
               WithinRel(std::abs(c) * cell_average_norm(v, pts, spec),
                         1e-13));
    CHECK(cell_average_norm(v, pts, spec) <= mx + 1e-15);
}
