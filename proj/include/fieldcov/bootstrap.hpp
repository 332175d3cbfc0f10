#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "core.hpp"
#include "dcov.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace fieldcov {

enum class TestVariant { dcor_resample, un_kernel };

inline const char* variant_name(TestVariant v) {
    return v == TestVariant::dcor_resample ? "dcor-resample" : "un-kernel";
}

struct TestConfig {
    int B = 200;
    double xi = 0.05;
    TestVariant variant = TestVariant::dcor_resample;
    std::uint64_t seed = 0;

    void validate() const {
        if (B < 50)
            throw config_error("bootstrap needs B >= 50, got " +
                               std::to_string(B));
        if (!(xi > 0.0) || !(xi <= 0.5))
            throw config_error("test level xi must lie in (0, 0.5]");
    }
};

struct TestResult {
    double statistic = 0.0;
    // One value per resample, in resample order. Degenerate resamples are
    // recorded as -inf so they can never push the quantile above a finite
    // statistic's reach from below.
    std::vector<double> bootstrap_values;
    double quantile = 0.0;
    bool reject = false;
    // Set when the observed statistic itself has no value (a constant
    // field on either side). reject is then false by definition.
    bool undefined = false;
    // Resamples that produced a finite value.
    int retained = 0;
};

// n indices drawn iid uniform with replacement.
inline std::vector<std::size_t> resample_pairs(std::size_t n, RngStream& rng) {
    if (n == 0) throw config_error("cannot resample an empty sample");
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.index(n));
    return idx;
}

// k-th smallest with k = ceil((1 - xi) B), 1-indexed, no interpolation.
// The small slack absorbs the representation error of (1 - xi) * B when
// the product is mathematically integral.
inline double order_quantile(std::vector<double> values, double xi) {
    if (values.empty()) throw config_error("quantile of no bootstrap values");
    const double bn = static_cast<double>(values.size());
    long k = static_cast<long>(std::ceil((1.0 - xi) * bn - 1e-9));
    k = std::max<long>(1, std::min<long>(k, static_cast<long>(values.size())));
    std::nth_element(values.begin(), values.begin() + (k - 1), values.end());
    return values[k - 1];
}

namespace detail {

inline RngStream resample_stream(const TestConfig& cfg,
                                 std::uint64_t replication, int b) {
    return RngStream(cfg.seed, replication,
                     purpose::bootstrap_base + static_cast<std::uint64_t>(b));
}

inline void finish(TestResult& r, double xi) {
    r.retained = 0;
    for (double v : r.bootstrap_values)
        if (std::isfinite(v)) ++r.retained;
    r.quantile = order_quantile(r.bootstrap_values, xi);
    r.reject = r.statistic >= r.quantile;
}

}  // namespace detail

// Distance-correlation test. The null distribution is rebuilt by breaking
// the pairing: each resample applies an independent uniform permutation to
// the y side and recomputes the correlation against the intact x side.
// Both marginal statistics are invariant under relabeling, so only the
// cross term is recomputed per resample.
inline TestResult bootstrap_test_dcor(const DistanceMatrix& dx,
                                      const DistanceMatrix& dy,
                                      const TestConfig& cfg,
                                      std::uint64_t replication = 0) {
    cfg.validate();
    detail::require_square_pair(dx, dy, 4);
    const Eigen::Index n = dx.rows();
    TestResult out;
    const DcovResult obs = sample_dcov(dx, dy);
    if (!obs.r_defined) {
        out.undefined = true;
        return out;
    }
    out.statistic = obs.r_xy;
    const double denom = std::sqrt(obs.t_xx * obs.t_yy);
    const Eigen::VectorXd rma = dx.rowwise().mean();
    const Eigen::VectorXd rmb = dy.rowwise().mean();
    const double ma = dx.mean();
    const double mb = dy.mean();
    const double dn = static_cast<double>(n);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    out.bootstrap_values.resize(static_cast<std::size_t>(cfg.B));
    for (int b = 0; b < cfg.B; ++b) {
        RngStream rs = detail::resample_stream(cfg, replication, b);
        std::iota(perm.begin(), perm.end(), Eigen::Index{0});
        std::shuffle(perm.begin(), perm.end(), rs.engine());
        double s1 = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::Index pj = perm[static_cast<std::size_t>(j)];
            for (Eigen::Index i = 0; i < n; ++i)
                s1 += dx(i, j) * dy(perm[static_cast<std::size_t>(i)], pj);
        }
        double s2 = 0.0;
        for (Eigen::Index k = 0; k < n; ++k)
            s2 += rma(k) * rmb(perm[static_cast<std::size_t>(k)]);
        const double t = s1 / (dn * dn) + ma * mb - 2.0 * s2 / dn;
        out.bootstrap_values[static_cast<std::size_t>(b)] = t / denom;
    }
    detail::finish(out, cfg.xi);
    return out;
}

// Kernel-based test. The observed statistic aggregates the degenerate
// projection under the product of the marginals; the resample values
// gather the joint plug-in projection, computed once, at paired
// with-replacement indices.
inline TestResult bootstrap_test_un(const DistanceMatrix& dx,
                                    const DistanceMatrix& dy,
                                    const TestConfig& cfg,
                                    std::uint64_t replication = 0) {
    cfg.validate();
    detail::require_square_pair(dx, dy, 4);
    const Eigen::Index n = dx.rows();
    const double dn = static_cast<double>(n);
    TestResult out;
    const DcovResult obs = sample_dcov(dx, dy);
    if (!obs.r_defined) {
        out.undefined = true;
        return out;
    }
    out.statistic = un_statistic(empirical_h2_product(dx, dy));
    const Eigen::MatrixXd h2 = empirical_h2(dx, dy).m;
    out.bootstrap_values.resize(static_cast<std::size_t>(cfg.B));
    for (int b = 0; b < cfg.B; ++b) {
        RngStream rs = detail::resample_stream(cfg, replication, b);
        const auto idx = resample_pairs(static_cast<std::size_t>(n), rs);
        double s = 0.0;
        double diag = 0.0;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const Eigen::Index cj = static_cast<Eigen::Index>(idx[j]);
            for (std::size_t i = 0; i < idx.size(); ++i)
                s += h2(static_cast<Eigen::Index>(idx[i]), cj);
            diag += h2(cj, cj);
        }
        out.bootstrap_values[static_cast<std::size_t>(b)] = (s - diag) / dn;
    }
    detail::finish(out, cfg.xi);
    return out;
}

inline TestResult bootstrap_test(const DistanceMatrix& dx,
                                 const DistanceMatrix& dy,
                                 const TestConfig& cfg,
                                 std::uint64_t replication = 0) {
    return cfg.variant == TestVariant::dcor_resample
               ? bootstrap_test_dcor(dx, dy, cfg, replication)
               : bootstrap_test_un(dx, dy, cfg, replication);
}

// Flat one-row serialization:
//   statistic,quantile,reject,undefined,B,xi,variant,seed
inline std::string serialize_test(const TestResult& r, const TestConfig& c) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%d,%d,%d,%g,%s,%llu",
                  r.statistic, r.quantile, r.reject ? 1 : 0,
                  r.undefined ? 1 : 0, c.B, c.xi, variant_name(c.variant),
                  static_cast<unsigned long long>(c.seed));
    return std::string(buf);
}

}  // namespace fieldcov
