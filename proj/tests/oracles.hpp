#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

// Slow reference implementations, written independently of the library's
// closed forms: the V-statistic through explicit double centering, the
// U-statistic through exhaustive tuple enumeration, and the projection
// matrix through the symmetrized kernel and plug-in conditional averages.

namespace oracle {

inline Eigen::MatrixXd center_naive(const Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd out(n, n);
    const double gm = a.mean();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            out(i, j) = a(i, j) - a.row(i).mean() - a.col(j).mean() + gm;
    return out;
}

// V-statistic as the mean of the elementwise product of the centered
// matrices, the form closest to the definition.
inline double vstat_naive(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return center_naive(a).cwiseProduct(center_naive(b)).mean();
}

inline double f_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       int i, int j, int k, int l) {
    return a(i, j) * b(i, j) + a(i, j) * b(k, l) - 2.0 * a(i, j) * b(i, k);
}

// U-statistic by direct enumeration of all ordered distinct 4-tuples.
inline double ustat_enumerated(const Eigen::MatrixXd& a,
                               const Eigen::MatrixXd& b) {
    const int n = static_cast<int>(a.rows());
    double tot = 0.0;
    long cnt = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) {
                    if (i == j || i == k || i == l || j == k || j == l ||
                        k == l)
                        continue;
                    tot += f_kernel(a, b, i, j, k, l);
                    ++cnt;
                }
    return tot / static_cast<double>(cnt);
}

// Symmetrization of the kernel over the 24 argument orders.
inline double h_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       std::array<int, 4> idx) {
    std::array<int, 4> p = idx;
    std::sort(p.begin(), p.end());
    double tot = 0.0;
    int cnt = 0;
    do {
        tot += f_kernel(a, b, p[0], p[1], p[2], p[3]);
        ++cnt;
    } while (std::next_permutation(p.begin(), p.end()));
    return tot / static_cast<double>(cnt);
}

// Second projection at the joint empirical measure by brute plug-in:
// condition the symmetrized kernel on its first two slots, average the
// rest over all sample indices, then double-center.
inline Eigen::MatrixXd h2_plugin(const Eigen::MatrixXd& a,
                                 const Eigen::MatrixXd& b) {
    const int n = static_cast<int>(a.rows());
    const double dn = static_cast<double>(n);
    Eigen::MatrixXd g(n, n);
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            double s = 0.0;
            for (int u = 0; u < n; ++u)
                for (int v = 0; v < n; ++v)
                    s += h_kernel(a, b, {k, l, u, v});
            g(k, l) = s / (dn * dn);
        }
    Eigen::VectorXd g1(n);
    for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int u = 0; u < n; ++u)
            for (int v = 0; v < n; ++v)
                for (int w = 0; w < n; ++w)
                    s += h_kernel(a, b, {k, u, v, w});
        g1(k) = s / (dn * dn * dn);
    }
    const double g0 = g.mean();
    Eigen::MatrixXd h2(n, n);
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) h2(k, l) = g(k, l) - g1(k) - g1(l) + g0;
    return h2;
}

}  // namespace oracle
