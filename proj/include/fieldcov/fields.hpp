#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace fieldcov {

// Hard size cap for simulators that factor a dense covariance.
constexpr std::size_t kCholeskyCap = 4096;

struct FbsParams {
    // One Hurst exponent per coordinate axis.
    std::vector<double> hurst;

    void validate(int d) const {
        if (static_cast<int>(hurst.size()) != d)
            throw config_error("need one Hurst exponent per axis, got " +
                               std::to_string(hurst.size()) + " for d = " +
                               std::to_string(d));
        for (double h : hurst)
            if (!(h > 0.0) || !(h < 1.0))
                throw config_error("Hurst exponent must lie in (0, 1)");
    }
};

// Symmetric alpha-stable marginal with characteristic function
// exp(-c^alpha |u|^alpha). alpha = 2 is Gaussian with variance 2 c^2.
struct StableParams {
    double alpha = 2.0;
    double c = 1.0;

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 2.0))
            throw config_error("stable index alpha must lie in (0, 2]");
        if (!(c > 0.0)) throw config_error("stable scale c must be positive");
    }
};

enum class Family { gaussian, stable };

struct DependenceSpec {
    Family family = Family::gaussian;
    // rho = 0 gives an independent pair, rho = 1 a duplicated field.
    double rho = 0.0;
    // Only consulted for the stable blend, which needs alpha < 2.
    double alpha = 1.8;

    void validate() const {
        if (!(rho >= 0.0) || !(rho <= 1.0))
            throw config_error("dependence rho must lie in [0, 1]");
        if (family == Family::stable && (!(alpha > 0.0) || !(alpha < 2.0)))
            throw config_error("stable dependence blend needs alpha in (0, 2)");
    }
};

namespace detail {

// Chambers-Mallows-Stuck draw with unit scale. Valid on all of (0, 2]:
// at alpha = 1 the exponent vanishes and the formula collapses to tan(U),
// at alpha = 2 it collapses to 2 sqrt(W) sin(U), which is N(0, 2).
inline double standard_stable(double alpha, RngStream& rng) {
    const double u = rng.uniform();
    const double U = M_PI * (u - 0.5);
    const double W = -std::log(1.0 - rng.uniform());
    if (alpha == 1.0) return std::tan(U);
    const double cu = std::cos(U);
    const double t1 = std::sin(alpha * U) / std::pow(cu, 1.0 / alpha);
    const double t2 =
        std::pow(std::cos((1.0 - alpha) * U) / W, (1.0 - alpha) / alpha);
    return t1 * t2;
}

// Dense Gaussian sampler: factor the covariance once, draw by one
// matrix-vector product. The diagonal gets an escalating jitter, starting
// at 1e-12 of the largest variance and growing tenfold on factorization
// failure; past 1e-8 the matrix is treated as broken.
class GaussianSampler {
public:
    explicit GaussianSampler(Eigen::MatrixXd cov) {
        const Eigen::Index n = cov.rows();
        if (n == 0 || cov.cols() != n)
            throw config_error("covariance must be square and nonempty");
        double scale = cov.diagonal().maxCoeff();
        if (!(scale > 0.0)) scale = 1.0;
        double jitter = 1e-12 * scale;
        const double cap = 1e-8 * scale;
        for (;;) {
            Eigen::MatrixXd work = cov;
            work.diagonal().array() += jitter;
            Eigen::LLT<Eigen::MatrixXd> llt(work);
            if (llt.info() == Eigen::Success) {
                chol_ = llt.matrixL();
                jitter_ = jitter;
                return;
            }
            jitter *= 10.0;
            if (jitter > cap)
                throw numeric_error(
                    "covariance factorization failed even at jitter 1e-8");
        }
    }

    Eigen::Index size() const { return chol_.rows(); }
    double jitter() const { return jitter_; }

    FieldRealization draw(RngStream& rng) const {
        const Eigen::Index n = chol_.rows();
        Eigen::VectorXd z(n);
        for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
        Eigen::VectorXd v = chol_ * z;
        FieldRealization f;
        f.values.assign(v.data(), v.data() + n);
        return f;
    }

private:
    Eigen::MatrixXd chol_;
    double jitter_ = 0.0;
};

inline Eigen::MatrixXd fbs_covariance(
    const std::vector<std::vector<double>>& pts, const FbsParams& params) {
    const std::size_t n = pts.size();
    const std::size_t d = pts.empty() ? 0 : pts.front().size();
    Eigen::MatrixXd cov(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double c = 1.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double h2 = 2.0 * params.hurst[k];
                const double s = pts[i][k];
                const double t = pts[j][k];
                c *= 0.5 * (std::pow(std::abs(s), h2) +
                            std::pow(std::abs(t), h2) -
                            std::pow(std::abs(s - t), h2));
            }
            cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
            cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = c;
        }
    }
    return cov;
}

inline void check_unit_cube(const std::vector<std::vector<double>>& pts) {
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (double c : pts[i])
            if (!(c >= 0.0) || !(c <= 1.0))
                throw data_error("point " + std::to_string(i) +
                                 " lies outside [0, 1]^d");
}

}  // namespace detail

inline double sample_stable(const StableParams& params, RngStream& rng) {
    params.validate();
    return params.c * detail::standard_stable(params.alpha, rng);
}

// Fractional Brownian sheet at an arbitrary finite point set, covariance
//   prod_k (|s_k|^{2H_k} + |t_k|^{2H_k} - |s_k - t_k|^{2H_k}) / 2.
// Factor once, draw many.
class FbsPointsSampler {
public:
    FbsPointsSampler(const std::vector<std::vector<double>>& points,
                     const FbsParams& params)
        : sampler_(build(points, params)) {}

    FieldRealization draw(RngStream& rng) const { return sampler_.draw(rng); }
    double jitter() const { return sampler_.jitter(); }

private:
    static detail::GaussianSampler build(
        const std::vector<std::vector<double>>& points,
        const FbsParams& params) {
        if (points.empty())
            throw config_error("fractional Brownian sheet needs points");
        if (points.size() > kCholeskyCap)
            throw config_error(
                "point count " + std::to_string(points.size()) +
                " exceeds the dense factorization cap " +
                std::to_string(kCholeskyCap) +
                "; use the increment-sheet simulator for large lattices");
        params.validate(static_cast<int>(points.front().size()));
        detail::check_unit_cube(points);
        return detail::GaussianSampler(detail::fbs_covariance(points, params));
    }

    detail::GaussianSampler sampler_;
};

class FbsLatticeSampler {
public:
    FbsLatticeSampler(const LatticeSpec& lat, const FbsParams& params)
        : sampler_(build(lat, params)) {}

    FieldRealization draw(RngStream& rng) const { return sampler_.draw(rng); }
    double jitter() const { return sampler_.jitter(); }

private:
    static detail::GaussianSampler build(const LatticeSpec& lat,
                                         const FbsParams& params) {
        lat.validate();
        params.validate(lat.d);
        if (lat.site_count() > kCholeskyCap)
            throw config_error(
                "lattice has " + std::to_string(lat.site_count()) +
                " sites, above the dense factorization cap " +
                std::to_string(kCholeskyCap) +
                "; use the increment-sheet simulator instead");
        return detail::GaussianSampler(
            detail::fbs_covariance(lat.sites(), params));
    }

    detail::GaussianSampler sampler_;
};

inline FieldRealization simulate_fbs_lattice(const LatticeSpec& lat,
                                             const FbsParams& params,
                                             RngStream& rng) {
    return FbsLatticeSampler(lat, params).draw(rng);
}

inline FieldRealization simulate_fbs_at_points(
    const std::vector<std::vector<double>>& points, const FbsParams& params,
    RngStream& rng) {
    return FbsPointsSampler(points, params).draw(rng);
}

// Levy fractional Brownian field: isotropic covariance
//   (|s|^{2H} + |t|^{2H} - |s - t|^{2H}) / 2 with Euclidean norms.
class LevyFbfSampler {
public:
    LevyFbfSampler(const std::vector<std::vector<double>>& points, double hurst)
        : sampler_(build(points, hurst)) {}

    FieldRealization draw(RngStream& rng) const { return sampler_.draw(rng); }

private:
    static detail::GaussianSampler build(
        const std::vector<std::vector<double>>& points, double hurst) {
        if (points.empty()) throw config_error("Levy field needs points");
        if (points.size() > kCholeskyCap)
            throw config_error("point count exceeds the dense factorization "
                               "cap " + std::to_string(kCholeskyCap));
        if (!(hurst > 0.0) || !(hurst < 1.0))
            throw config_error("Hurst exponent must lie in (0, 1)");
        const std::size_t n = points.size();
        const auto norm = [](const std::vector<double>& a,
                             const std::vector<double>& b) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k)
                s += (a[k] - b[k]) * (a[k] - b[k]);
            return std::sqrt(s);
        };
        const std::vector<double> origin(points.front().size(), 0.0);
        Eigen::MatrixXd cov(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i; j < n; ++j) {
                const double si = norm(points[i], origin);
                const double tj = norm(points[j], origin);
                const double st = norm(points[i], points[j]);
                const double c =
                    0.5 * (std::pow(si, 2.0 * hurst) +
                           std::pow(tj, 2.0 * hurst) -
                           std::pow(st, 2.0 * hurst));
                cov(static_cast<Eigen::Index>(i),
                    static_cast<Eigen::Index>(j)) = c;
                cov(static_cast<Eigen::Index>(j),
                    static_cast<Eigen::Index>(i)) = c;
            }
        }
        return detail::GaussianSampler(cov);
    }

    detail::GaussianSampler sampler_;
};

inline FieldRealization simulate_levy_fbf(
    const std::vector<std::vector<double>>& points, double hurst,
    RngStream& rng) {
    return LevyFbfSampler(points, hurst).draw(rng);
}

// Sheet built from independent cell increments on a d = 2 lattice and
// cumulated by a two-dimensional prefix sum. Gaussian increments give the
// Brownian sheet; stable increments give the stable sheet with scale
// c * area^(1/alpha) per cell. Runs in O(p) per draw with no size cap.
inline FieldRealization simulate_increment_sheet_lattice(
    const LatticeSpec& lat, const std::optional<StableParams>& stable,
    RngStream& rng) {
    lat.validate();
    if (lat.d != 2)
        throw config_error("increment sheet is defined on d = 2 lattices");
    if (stable) stable->validate();
    const int q = lat.q;
    const double p = static_cast<double>(lat.site_count());
    const double cell_sd = std::sqrt(1.0 / p);
    const double cell_scale =
        stable ? stable->c * std::pow(1.0 / p, 1.0 / stable->alpha) : 0.0;
    std::vector<double> grid(static_cast<std::size_t>(q) * q);
    for (double& g : grid)
        g = stable ? cell_scale * detail::standard_stable(stable->alpha, rng)
                   : cell_sd * rng.normal();
    // Prefix along the fast axis, then the slow axis; entry (i, j) becomes
    // the sheet value at site (i/q, j/q), matching LatticeSpec::sites().
    for (int i = 0; i < q; ++i)
        for (int j = 1; j < q; ++j)
            grid[static_cast<std::size_t>(i) * q + j] +=
                grid[static_cast<std::size_t>(i) * q + j - 1];
    for (int i = 1; i < q; ++i)
        for (int j = 0; j < q; ++j)
            grid[static_cast<std::size_t>(i) * q + j] +=
                grid[static_cast<std::size_t>(i - 1) * q + j];
    FieldRealization f;
    f.values = std::move(grid);
    return f;
}

// Stable sheet observed at arbitrary points of [0, 1]^2, exact in law:
// cut the unit square along every distinct marginal coordinate, give each
// rectangle an independent stable mass with scale c * area^(1/alpha), and
// read the sheet off the prefix sums.
class StableSheetPointsSampler {
public:
    StableSheetPointsSampler(const std::vector<std::vector<double>>& points,
                             const StableParams& params)
        : params_(params) {
        params_.validate();
        for (const auto& pt : points)
            if (pt.size() != 2)
                throw config_error("stable sheet points must be planar");
        detail::check_unit_cube(points);
        n_ = points.size();
        if (n_ == 0) return;
        std::vector<double> xs, ys;
        for (const auto& pt : points) {
            xs.push_back(pt[0]);
            ys.push_back(pt[1]);
        }
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
        std::sort(ys.begin(), ys.end());
        ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
        xcuts_ = xs;
        ycuts_ = ys;
        xi_.resize(n_);
        yi_.resize(n_);
        for (std::size_t k = 0; k < n_; ++k) {
            xi_[k] = static_cast<std::size_t>(
                std::lower_bound(xs.begin(), xs.end(), points[k][0]) -
                xs.begin());
            yi_[k] = static_cast<std::size_t>(
                std::lower_bound(ys.begin(), ys.end(), points[k][1]) -
                ys.begin());
        }
    }

    FieldRealization draw(RngStream& rng) const {
        FieldRealization f;
        if (n_ == 0) return f;
        const std::size_t m = xcuts_.size();
        const std::size_t r = ycuts_.size();
        std::vector<double> cell(m * r);
        double prevx = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            const double wx = xcuts_[a] - prevx;
            prevx = xcuts_[a];
            double prevy = 0.0;
            for (std::size_t b = 0; b < r; ++b) {
                const double wy = ycuts_[b] - prevy;
                prevy = ycuts_[b];
                const double area = wx * wy;
                const double raw = detail::standard_stable(params_.alpha, rng);
                cell[a * r + b] =
                    area > 0.0
                        ? params_.c * std::pow(area, 1.0 / params_.alpha) * raw
                        : 0.0;
            }
        }
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 1; b < r; ++b)
                cell[a * r + b] += cell[a * r + b - 1];
        for (std::size_t a = 1; a < m; ++a)
            for (std::size_t b = 0; b < r; ++b)
                cell[a * r + b] += cell[(a - 1) * r + b];
        f.values.resize(n_);
        for (std::size_t k = 0; k < n_; ++k)
            f.values[k] = cell[xi_[k] * r + yi_[k]];
        return f;
    }

private:
    StableParams params_;
    std::size_t n_ = 0;
    std::vector<double> xcuts_, ycuts_;
    std::vector<std::size_t> xi_, yi_;
};

inline FieldRealization simulate_stable_sheet_at_points(
    const std::vector<std::vector<double>>& points, const StableParams& params,
    RngStream& rng) {
    return StableSheetPointsSampler(points, params).draw(rng);
}

// Blend a draw with an independent copy. Endpoints are exact: rho = 0
// returns the independent copy unchanged, rho = 1 the original. The
// stable mixing weight (1 - rho^alpha)^(1/alpha) keeps the marginal
// stable law; the Gaussian one is its alpha = 2 case.
inline FieldRealization make_dependent_pair(const FieldRealization& x,
                                            const FieldRealization& indep,
                                            const DependenceSpec& spec) {
    spec.validate();
    if (x.size() != indep.size())
        throw config_error("dependent pair needs equal-length realizations");
    if (spec.rho == 0.0) return indep;
    if (spec.rho == 1.0) return x;
    const double a = spec.family == Family::stable ? spec.alpha : 2.0;
    const double w = std::pow(1.0 - std::pow(spec.rho, a), 1.0 / a);
    FieldRealization y;
    y.values.resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k)
        y.values[k] = spec.rho * x.values[k] + w * indep.values[k];
    return y;
}

// Homogeneous Poisson sample of [0, 1]^d: the point count is
// Poisson(intensity), locations are iid uniform.
inline LocationSet sample_poisson_locations(double intensity, int d,
                                            RngStream& rng) {
    if (!(intensity > 0.0))
        throw config_error("Poisson intensity must be positive");
    if (d < 1) throw config_error("location dimension must be >= 1");
    std::poisson_distribution<long> pois(intensity);
    const long n = pois(rng.engine());
    LocationSet out;
    out.intensity = intensity;
    out.points.resize(static_cast<std::size_t>(n));
    for (auto& pt : out.points) {
        pt.resize(static_cast<std::size_t>(d));
        for (double& c : pt) c = rng.uniform();
    }
    return out;
}

}  // namespace fieldcov
