#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace fieldcov {

struct DcovResult {
    double t_xy = 0.0;
    double t_xx = 0.0;
    double t_yy = 0.0;
    double r_xy = 0.0;
    // False when either marginal statistic vanishes (constant field): the
    // correlation has no value then and r_xy must not be read.
    bool r_defined = false;
};

// Double-centered matrix. Row and column sums vanish identically; numeric
// error stays below 1e-9 * n * max|entry|.
struct CenteredKernelMatrix {
    Eigen::MatrixXd m;
};

namespace detail {

inline void require_square_pair(const Eigen::MatrixXd& a,
                                const Eigen::MatrixXd& b,
                                Eigen::Index min_n) {
    if (a.rows() != a.cols() || b.rows() != b.cols())
        throw config_error("distance matrices must be square");
    if (a.rows() != b.rows())
        throw config_error("distance matrices disagree in size: " +
                           std::to_string(a.rows()) + " vs " +
                           std::to_string(b.rows()));
    if (a.rows() < min_n)
        throw config_error("need at least " + std::to_string(min_n) +
                           " replications, got " + std::to_string(a.rows()));
}

// Row-sum form of the V-statistic:
//   mean(A o B) + mean(A) mean(B) - 2 mean_k(rowmean A_k * rowmean B_k).
inline double vstat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const double s1 = a.cwiseProduct(b).mean();
    const double s2 =
        a.rowwise().mean().cwiseProduct(b.rowwise().mean()).mean();
    return s1 + a.mean() * b.mean() - 2.0 * s2;
}

inline double clamp_nonneg(double t, double scale, const char* which) {
    const double tol = 1e-12 * std::max(1.0, scale);
    if (t < -tol)
        throw numeric_error(std::string(which) +
                            " came out negative beyond tolerance: " +
                            std::to_string(t));
    return t < 0.0 ? 0.0 : t;
}

}  // namespace detail

inline CenteredKernelMatrix center_matrix(const Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    if (n == 0 || a.cols() != n)
        throw config_error("centering needs a nonempty square matrix");
    const Eigen::VectorXd rm = a.rowwise().mean();
    const Eigen::RowVectorXd cm = a.colwise().mean();
    const double gm = a.mean();
    CenteredKernelMatrix out;
    out.m = a;
    out.m.colwise() -= rm;
    out.m.rowwise() -= cm;
    out.m.array() += gm;
    return out;
}

// Sample distance covariance (V-statistic) of the two distance matrices,
// plus the marginal versions and the resulting correlation.
inline DcovResult sample_dcov(const DistanceMatrix& dx,
                              const DistanceMatrix& dy) {
    detail::require_square_pair(dx, dy, 2);
    const double mx = dx.cwiseAbs().maxCoeff();
    const double my = dy.cwiseAbs().maxCoeff();
    DcovResult r;
    r.t_xy = detail::vstat(dx, dy);
    r.t_xx = detail::clamp_nonneg(detail::vstat(dx, dx), mx * mx, "t_xx");
    r.t_yy = detail::clamp_nonneg(detail::vstat(dy, dy), my * my, "t_yy");
    if (r.t_xx > 0.0 && r.t_yy > 0.0) {
        r.r_xy = r.t_xy / std::sqrt(r.t_xx * r.t_yy);
        r.r_defined = true;
    }
    return r;
}

// Unbiased O(n^2) form of the fourth-order U-statistic:
//   [(n-1)(n-2) S1 + SA SB - 2(n-1) S2] / (n(n-1)(n-2)(n-3))
// with S1 = sum(A o B), SA = sum A, SB = sum B, S2 = rowsums(A).rowsums(B).
inline double ustat_dcov(const DistanceMatrix& dx, const DistanceMatrix& dy) {
    detail::require_square_pair(dx, dy, 4);
    const double n = static_cast<double>(dx.rows());
    const double s1 = dx.cwiseProduct(dy).sum();
    const double sa = dx.sum();
    const double sb = dy.sum();
    const double s2 = dx.rowwise().sum().dot(dy.rowwise().sum());
    return ((n - 1.0) * (n - 2.0) * s1 + sa * sb - 2.0 * (n - 1.0) * s2) /
           (n * (n - 1.0) * (n - 2.0) * (n - 3.0));
}

// Plug-in second Hoeffding projection of the symmetrized kernel at the
// joint empirical measure. Every conditional expectation becomes an
// average over sample indices; the aggregate collapses to a closed form
// in the row means, the elementwise product, and one matrix product.
inline CenteredKernelMatrix empirical_h2(const DistanceMatrix& dx,
                                         const DistanceMatrix& dy) {
    detail::require_square_pair(dx, dy, 2);
    const Eigen::Index n = dx.rows();
    const double dn = static_cast<double>(n);
    const Eigen::VectorXd abar = dx.rowwise().mean();
    const Eigen::VectorXd bbar = dy.rowwise().mean();
    const double am = dx.mean();
    const double bm = dy.mean();
    const Eigen::MatrixXd ab = dx.cwiseProduct(dy);
    const Eigen::VectorXd m1 = ab.rowwise().mean();
    const double m2 = ab.mean();
    const Eigen::MatrixXd c1 = (dx * dy) / dn;
    const Eigen::VectorXd dvec = (dx * bbar) / dn;
    const Eigen::VectorXd evec = (dy * abar) / dn;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd abbb = abar.cwiseProduct(bbar);

    Eigen::MatrixXd g =
        (ab + 2.0 * (m1 * ones.transpose()) + 2.0 * (ones * m1.transpose()) +
         Eigen::MatrixXd::Constant(n, n, m2) + bm * dx + am * dy +
         2.0 * (abar * bbar.transpose()) + 2.0 * (bbar * abar.transpose())) /
        6.0;
    g -= (dx.cwiseProduct(bbar * ones.transpose() + ones * bbar.transpose()) +
          dy.cwiseProduct(abar * ones.transpose() + ones * abar.transpose()) +
          abbb * ones.transpose() + ones * abbb.transpose() +
          c1 + c1.transpose() +
          dvec * ones.transpose() + ones * dvec.transpose() +
          evec * ones.transpose() + ones * evec.transpose()) /
         6.0;
    return center_matrix(g);
}

// The same projection evaluated at the product of the marginal empirical
// measures, where it factorizes exactly: one sixth of the elementwise
// product of the two double-centered distance matrices. This is the
// kernel the degenerate limit lives on and the statistic the bootstrap
// test aggregates.
inline Eigen::MatrixXd empirical_h2_product(const DistanceMatrix& dx,
                                            const DistanceMatrix& dy) {
    detail::require_square_pair(dx, dy, 2);
    return center_matrix(dx).m.cwiseProduct(center_matrix(dy).m) / 6.0;
}

// (1/n) sum_{i != j} H(i, j).
inline double un_statistic(const Eigen::MatrixXd& h) {
    const Eigen::Index n = h.rows();
    if (n < 2 || h.cols() != n)
        throw config_error("un_statistic needs a square matrix, n >= 2");
    return (h.sum() - h.trace()) / static_cast<double>(n);
}

inline double un_statistic(const CenteredKernelMatrix& h) {
    return un_statistic(h.m);
}

struct McEstimate {
    double value = 0.0;
    double se = 0.0;
    int reps = 0;
};

// Monte Carlo estimate of the population statistic
//   E[a b] + E[a] E[b] - 2 E[a(X1,X2) b(Y1,Y3)]
// from independent triples of draws, with a delete-one jackknife standard
// error. PairSampler: RngStream& -> pair<FieldRealization, FieldRealization>.
template <class PairSampler, class Norm>
McEstimate population_dcov_mc(PairSampler&& draw, const Norm& norm,
                              const DcovParams& params, int reps,
                              const RngStream& base) {
    params.validate();
    if (reps < 100)
        throw config_error("population Monte Carlo needs reps >= 100");
    const auto dist = [&](const FieldRealization& u,
                          const FieldRealization& v) {
        if (u.size() != v.size())
            throw config_error("sampler produced mismatched realizations");
        std::vector<double> diff(u.size());
        for (std::size_t k = 0; k < diff.size(); ++k)
            diff[k] = u.values[k] - v.values[k];
        return std::pow(norm(diff), params.beta);
    };
    std::vector<double> a(reps), b(reps), c(reps);
    for (int i = 0; i < reps; ++i) {
        RngStream s(base.master(), base.replication(),
                    purpose::mc_triple_base + static_cast<std::uint64_t>(i));
        const auto z1 = draw(s);
        const auto z2 = draw(s);
        const auto z3 = draw(s);
        a[i] = dist(z1.first, z2.first);
        b[i] = dist(z1.second, z2.second);
        c[i] = dist(z1.second, z3.second);
    }
    double s_ab = 0.0, s_a = 0.0, s_b = 0.0, s_ac = 0.0;
    for (int i = 0; i < reps; ++i) {
        s_ab += a[i] * b[i];
        s_a += a[i];
        s_b += b[i];
        s_ac += a[i] * c[i];
    }
    const double r = static_cast<double>(reps);
    McEstimate out;
    out.reps = reps;
    out.value = s_ab / r + (s_a / r) * (s_b / r) - 2.0 * s_ac / r;
    // Leave-one-out replicates from the running sums.
    std::vector<double> loo(reps);
    double loo_mean = 0.0;
    const double r1 = r - 1.0;
    for (int i = 0; i < reps; ++i) {
        loo[i] = (s_ab - a[i] * b[i]) / r1 +
                 ((s_a - a[i]) / r1) * ((s_b - b[i]) / r1) -
                 2.0 * (s_ac - a[i] * c[i]) / r1;
        loo_mean += loo[i];
    }
    loo_mean /= r;
    double ss = 0.0;
    for (int i = 0; i < reps; ++i)
        ss += (loo[i] - loo_mean) * (loo[i] - loo_mean);
    out.se = std::sqrt(r1 / r * ss);
    return out;
}

}  // namespace fieldcov
