#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "core.hpp"
#include "errors.hpp"

namespace fieldcov {

// Discrete L2 norm over a full lattice: sqrt((1/p) sum v_i^2). The site
// count is the vector length; an empty vector means a misconfigured
// lattice, not a legal observation.
inline double lattice_norm(const std::vector<double>& v) {
    if (v.empty()) throw config_error("lattice norm of an empty vector");
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

// Same average but over a random site count N_p, which may legally be
// zero: an empty Poisson draw observes nothing and contributes norm 0.
inline double random_location_norm(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

// Cell-averaged norm: average the entries within each tile of the spec's
// grid, then take the root mean square of the nonempty cell means. The
// divisor stays the full cell count; empty cells are skipped in the sum
// only.
inline double cell_average_norm(const std::vector<double>& v,
                                const std::vector<std::vector<double>>& points,
                                const CellAverageSpec& spec) {
    if (v.size() != points.size())
        throw config_error("cell-averaged norm: value/point count mismatch");
    if (v.empty()) return 0.0;
    const std::size_t cells = spec.cell_count();
    std::vector<double> sum(cells, 0.0);
    std::vector<std::size_t> cnt(cells, 0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::size_t j = spec.cell_index(points[i]);
        sum[j] += v[i];
        ++cnt[j];
    }
    double s = 0.0;
    for (std::size_t j = 0; j < cells; ++j) {
        if (cnt[j] == 0) continue;
        const double mean = sum[j] / static_cast<double>(cnt[j]);
        s += mean * mean;
    }
    return std::sqrt(s / static_cast<double>(cells));
}

struct LatticeNorm {
    double operator()(const std::vector<double>& v) const {
        return lattice_norm(v);
    }
};

struct RandomLocationNorm {
    double operator()(const std::vector<double>& v) const {
        return random_location_norm(v);
    }
};

struct CellAverageNorm {
    CellAverageSpec spec;
    const std::vector<std::vector<double>>* points = nullptr;

    double operator()(const std::vector<double>& v) const {
        return cell_average_norm(v, *points, spec);
    }
};

}  // namespace fieldcov
