#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"

namespace fieldcov {

struct DcovParams {
    // Exponent applied to the field distance. Open interval: beta = 2 loses
    // the characterization of independence, beta = 0 is degenerate.
    double beta = 1.0;

    void validate() const {
        if (!(beta > 0.0) || !(beta < 2.0)) {
            throw config_error("beta must lie in (0, 2), got " +
                               std::to_string(beta));
        }
    }
};

// Regular lattice over (0, 1]^d: sites (i_1/q, ..., i_d/q), i_k in 1..q.
struct LatticeSpec {
    int d = 1;
    int q = 1;

    void validate() const {
        if (d < 1) throw config_error("lattice dimension must be >= 1");
        if (q < 1) throw config_error("lattice resolution q must be >= 1");
    }

    std::size_t site_count() const {
        std::size_t p = 1;
        for (int k = 0; k < d; ++k) p *= static_cast<std::size_t>(q);
        return p;
    }

    // Row-major site enumeration; the last coordinate varies fastest. Field
    // values are stored in this order everywhere.
    std::vector<std::vector<double>> sites() const {
        validate();
        const std::size_t p = site_count();
        std::vector<std::vector<double>> out(p, std::vector<double>(d));
        std::vector<int> idx(d, 1);
        for (std::size_t s = 0; s < p; ++s) {
            for (int k = 0; k < d; ++k)
                out[s][k] = static_cast<double>(idx[k]) / q;
            for (int k = d - 1; k >= 0; --k) {
                if (++idx[k] <= q) break;
                idx[k] = 1;
            }
        }
        return out;
    }
};

// Random observation sites in [0, 1]^d. intensity records the Poisson mean
// the set was drawn with; count() is the realized N_p and may be zero.
struct LocationSet {
    std::vector<std::vector<double>> points;
    double intensity = 0.0;

    std::size_t count() const { return points.size(); }

    int dim() const {
        return points.empty() ? 0 : static_cast<int>(points.front().size());
    }

    void validate() const {
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (points[i].size() != points.front().size())
                throw config_error("location " + std::to_string(i) +
                                   " has inconsistent dimension");
        }
    }
};

// Disjoint covering tiling of [0, 1]^d used by the cell-averaged norm.
// The target cell count is floor(p / log p); the realized grid uses
// m = floor(target^(1/d)) cells per axis so the tiling is exact.
struct CellAverageSpec {
    int d = 1;
    std::size_t site_count = 0;
    std::size_t target_cells = 0;
    int per_axis = 1;

    CellAverageSpec() = default;

    CellAverageSpec(int dim, std::size_t p) : d(dim), site_count(p) {
        if (dim < 1) throw config_error("cell tiling dimension must be >= 1");
        if (p <= 3)
            throw config_error(
                "cell-averaged norm needs more than 3 sites, got " +
                std::to_string(p));
        target_cells = static_cast<std::size_t>(
            static_cast<double>(p) / std::log(static_cast<double>(p)));
        per_axis = std::max(
            1, static_cast<int>(std::floor(std::pow(
                   static_cast<double>(target_cells), 1.0 / dim))));
        // floor(pow(...)) can land one below the exact root for perfect
        // powers; bump back up while it still fits.
        while (pow_cells(per_axis + 1) <= target_cells) ++per_axis;
    }

    std::size_t cell_count() const { return pow_cells(per_axis); }

    // O(d): independent binning along each axis. Points sit in (0, 1]^d for
    // lattices; the right edge closes into the last cell.
    std::size_t cell_index(const std::vector<double>& point) const {
        if (static_cast<int>(point.size()) != d)
            throw config_error("point dimension does not match cell tiling");
        std::size_t idx = 0;
        for (int k = 0; k < d; ++k) {
            const double c = point[k];
            if (!(c >= 0.0) || !(c <= 1.0))
                throw data_error("point coordinate " + std::to_string(c) +
                                 " outside [0, 1]");
            int bin = static_cast<int>(c * per_axis);
            if (bin >= per_axis) bin = per_axis - 1;
            idx = idx * static_cast<std::size_t>(per_axis) +
                  static_cast<std::size_t>(bin);
        }
        return idx;
    }

private:
    std::size_t pow_cells(int m) const {
        std::size_t c = 1;
        for (int k = 0; k < d; ++k) c *= static_cast<std::size_t>(m);
        return c;
    }
};

// One observed field: values aligned with the site enumeration of its
// lattice or location set.
struct FieldRealization {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

// n independent replications of the pair (X, Y).
struct PairedSample {
    std::vector<FieldRealization> x;
    std::vector<FieldRealization> y;

    std::size_t n() const { return x.size(); }

    void validate() const {
        if (x.size() != y.size())
            throw config_error("paired sample has mismatched replication "
                               "counts");
        if (x.size() < 2)
            throw config_error("paired sample needs at least 2 replications");
    }
};

using DistanceMatrix = Eigen::MatrixXd;

// D(i, j) = norm(f_i - f_j)^beta. Norm is any callable taking the
// componentwise difference vector. Symmetric with zero diagonal by
// construction; computed once per (i < j).
template <class Norm>
DistanceMatrix distance_matrix(const std::vector<FieldRealization>& fields,
                               const Norm& norm, const DcovParams& params) {
    params.validate();
    const std::size_t n = fields.size();
    if (n == 0) throw config_error("distance matrix of an empty sample");
    const std::size_t len = fields.front().size();
    for (std::size_t i = 0; i < n; ++i) {
        if (fields[i].size() != len)
            throw config_error("realization " + std::to_string(i) +
                               " has length " +
                               std::to_string(fields[i].size()) +
                               ", expected " + std::to_string(len));
        for (std::size_t k = 0; k < len; ++k) {
            if (!std::isfinite(fields[i].values[k]))
                throw data_error("non-finite value in realization " +
                                 std::to_string(i) + " at component " +
                                 std::to_string(k));
        }
    }
    DistanceMatrix out = DistanceMatrix::Zero(static_cast<Eigen::Index>(n),
                                              static_cast<Eigen::Index>(n));
    std::vector<double> diff(len);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            for (std::size_t k = 0; k < len; ++k)
                diff[k] = fields[i].values[k] - fields[j].values[k];
            const double d = std::pow(norm(diff), params.beta);
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
            out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d;
        }
    }
    return out;
}

}  // namespace fieldcov
