#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <fieldcov/core.hpp>
#include <fieldcov/dcov.hpp>
#include <fieldcov/fields.hpp>
#include <fieldcov/norms.hpp>
#include <fieldcov/rng.hpp>

#include "oracles.hpp"

using namespace fieldcov;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<FieldRealization> random_fields(int n, int len, RngStream& rng) {
    std::vector<FieldRealization> fs(static_cast<std::size_t>(n));
    for (auto& f : fs) {
        f.values.resize(static_cast<std::size_t>(len));
        for (auto& v : f.values) v = rng.normal();
    }
    return fs;
}

DistanceMatrix dmat(const std::vector<FieldRealization>& fs,
                    double beta = 1.0) {
    return distance_matrix(fs, LatticeNorm{}, DcovParams{beta});
}

}  // namespace

TEST_CASE("centered matrices have vanishing row and column sums") {
    RngStream rng(3);
    auto fs = random_fields(15, 4, rng);
    auto d = dmat(fs);
    auto c = center_matrix(d);
    const double tol = 1e-9 * 15 * c.m.cwiseAbs().maxCoeff();
    for (int i = 0; i < 15; ++i) {
        CHECK(std::abs(c.m.row(i).sum()) < tol);
        CHECK(std::abs(c.m.col(i).sum()) < tol);
    }
}

TEST_CASE("centering a constant matrix gives zero") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(6, 6, 4.2);
    auto c = center_matrix(m);
    CHECK(c.m.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("two point sample dcov closed form") {
    // T_2 = ab / 4 with a, b the single off-diagonal distances.
    std::vector<FieldRealization> xs{FieldRealization{{0.0}},
                                     FieldRealization{{3.0}}};
    std::vector<FieldRealization> ys{FieldRealization{{1.0}},
                                     FieldRealization{{6.0}}};
    auto r = sample_dcov(dmat(xs), dmat(ys));
    CHECK_THAT(r.t_xy, WithinRel(3.0 * 5.0 / 4.0, 1e-14));
    CHECK_THAT(r.t_xx, WithinRel(9.0 / 4.0, 1e-14));
    CHECK_THAT(r.t_yy, WithinRel(25.0 / 4.0, 1e-14));
    REQUIRE(r.r_defined);
    CHECK_THAT(r.r_xy, WithinRel(1.0, 1e-12));
}

TEST_CASE("sample dcov matches the centered-matrix definition") {
    RngStream rng(101);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 5 + static_cast<int>(rng.index(30));
        auto xs = random_fields(n, 3, rng);
        auto ys = random_fields(n, 3, rng);
        auto a = dmat(xs), b = dmat(ys);
        auto r = sample_dcov(a, b);
        CHECK_THAT(r.t_xy, WithinRel(oracle::vstat_naive(a, b), 1e-12));
        CHECK_THAT(r.t_xx, WithinRel(oracle::vstat_naive(a, a), 1e-12));
    }
}

TEST_CASE("self correlation is one and r is scale invariant") {
    RngStream rng(55);
    auto xs = random_fields(12, 5, rng);
    auto a = dmat(xs);
    auto self = sample_dcov(a, a);
    REQUIRE(self.r_defined);
    CHECK_THAT(self.r_xy, WithinRel(1.0, 1e-12));

    auto ys = random_fields(12, 5, rng);
    auto scaled = ys;
    for (auto& f : scaled)
        for (auto& v : f.values) v *= 7.5;
    auto r1 = sample_dcov(a, dmat(ys));
    auto r2 = sample_dcov(a, dmat(scaled));
    CHECK_THAT(r1.r_xy, WithinRel(r2.r_xy, 1e-12));
}

TEST_CASE("constant fields leave the correlation undefined") {
    std::vector<FieldRealization> xs(5, FieldRealization{{2.0, 2.0}});
    RngStream rng(6);
    auto ys = random_fields(5, 2, rng);
    auto r = sample_dcov(dmat(xs), dmat(ys));
    CHECK(r.t_xx == 0.0);
    CHECK_FALSE(r.r_defined);
}

TEST_CASE("u statistic closed form equals tuple enumeration") {
    RngStream rng(77);
    for (int n = 4; n <= 8; ++n) {
        auto xs = random_fields(n, 3, rng);
        auto ys = random_fields(n, 3, rng);
        auto a = dmat(xs), b = dmat(ys);
        CHECK_THAT(ustat_dcov(a, b),
                   WithinRel(oracle::ustat_enumerated(a, b), 1e-10));
    }
}

TEST_CASE("u statistic needs at least four points") {
    RngStream rng(78);
    auto xs = random_fields(3, 2, rng);
    auto ys = random_fields(3, 2, rng);
    CHECK_THROWS_AS(ustat_dcov(dmat(xs), dmat(ys)), config_error);
}

TEST_CASE("projection matrix matches the plug-in oracle up to n = 6") {
    RngStream rng(88);
    for (int n = 4; n <= 6; ++n) {
        auto xs = random_fields(n, 3, rng);
        auto ys = random_fields(n, 3, rng);
        auto a = dmat(xs), b = dmat(ys);
        auto h2 = empirical_h2(a, b);
        auto ref = oracle::h2_plugin(a, b);
        CHECK((h2.m - ref).cwiseAbs().maxCoeff() < 1e-10);
        const double tol = 1e-9 * n * h2.m.cwiseAbs().maxCoeff();
        for (int i = 0; i < n; ++i) {
            CHECK(std::abs(h2.m.row(i).sum()) < tol);
            CHECK(std::abs(h2.m.col(i).sum()) < tol);
        }
    }
}

TEST_CASE("un statistic on a 2x2 kernel returns the off-diagonal value") {
    Eigen::MatrixXd h(2, 2);
    h << 9.0, 0.125, 0.125, -4.0;
    CHECK_THAT(un_statistic(h), WithinRel(0.125, 1e-15));
    CHECK_THROWS_AS(un_statistic(Eigen::MatrixXd::Zero(1, 1)), config_error);
}

TEST_CASE("product kernel aggregates to a shifted scaled V statistic") {
    // sum of the product matrix is n^2 T_n, so the un statistic is
    // n T_n / 6 minus the trace correction.
    RngStream rng(91);
    auto xs = random_fields(20, 4, rng);
    auto ys = random_fields(20, 4, rng);
    auto a = dmat(xs), b = dmat(ys);
    const auto prod = empirical_h2_product(a, b);
    const double t = sample_dcov(a, b).t_xy;
    CHECK_THAT(prod.sum(), WithinRel(20.0 * 20.0 * t / 6.0, 1e-10));
}

TEST_CASE("population Monte Carlo behaves under independence and identity") {
    DcovParams params{1.0};
    LatticeNorm norm;
    RngStream base(1234);

    auto indep = [](RngStream& s) {
        FieldRealization x{{s.normal(), s.normal(), s.normal()}};
        FieldRealization y{{s.normal(), s.normal(), s.normal()}};
        return std::make_pair(x, y);
    };
    auto est = population_dcov_mc(indep, norm, params, 400, base);
    CHECK(std::abs(est.value) <= 3.0 * est.se);

    auto same = [](RngStream& s) {
        FieldRealization x{{s.normal(), s.normal(), s.normal()}};
        return std::make_pair(x, x);
    };
    auto est2 = population_dcov_mc(same, norm, params, 400, base.substream(9));
    CHECK(est2.value > 3.0 * est2.se);
    CHECK(est2.value > 0.0);
}

TEST_CASE("population Monte Carlo standard error shrinks with reps") {
    DcovParams params{1.0};
    LatticeNorm norm;
    auto indep = [](RngStream& s) {
        FieldRealization x{{s.normal(), s.normal()}};
        FieldRealization y{{s.normal(), s.normal()}};
        return std::make_pair(x, y);
    };
    auto e1 = population_dcov_mc(indep, norm, params, 500, RngStream(777));
    auto e2 = population_dcov_mc(indep, norm, params, 1000, RngStream(777));
    // Doubling the reps should shave the jackknife SE by about sqrt(2).
    CHECK(e2.se < e1.se);
    CHECK(e2.se > 0.45 * e1.se);
    CHECK(e2.se < 0.95 * e1.se);
    CHECK_THROWS_AS(
        population_dcov_mc(indep, norm, params, 99, RngStream(1)),
        config_error);
}
