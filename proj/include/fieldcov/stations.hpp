#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bootstrap.hpp"
#include "core.hpp"
#include "dcov.hpp"
#include "errors.hpp"
#include "fields.hpp"
#include "norms.hpp"
#include "rng.hpp"

namespace fieldcov {

inline const char* kStationCsvHeader =
    "station_id,lat,lon,region,year,month,temp,prec,wind";

inline const char* kRegionalCsvHeader =
    "region,season,pair,R,quantile,reject,n_months,n_stations";

struct YearMonth {
    int year = 0;
    int month = 0;

    bool operator<(const YearMonth& o) const {
        return year != o.year ? year < o.year : month < o.month;
    }
    bool operator==(const YearMonth& o) const {
        return year == o.year && month == o.month;
    }
};

// Monthly series are aligned with the panel's month axis after loading;
// gaps are filled by that station's own series mean.
struct StationRecord {
    std::string id;
    double lat = 0.0;
    double lon = 0.0;
    std::string region;
    std::vector<double> temp;
    std::vector<double> prec;
    std::vector<double> wind;
};

struct StationPanel {
    std::vector<StationRecord> stations;
    std::vector<YearMonth> months;
    // Bounding-box normalized (lon, lat) per station, in [0, 1]^2. A
    // degenerate axis collapses to 0.5.
    std::vector<std::array<double, 2>> coords;
};

enum class Season { winter, spring, summer, autumn, all };

inline const char* season_name(Season s) {
    switch (s) {
        case Season::winter: return "winter";
        case Season::spring: return "spring";
        case Season::summer: return "summer";
        case Season::autumn: return "autumn";
        default: return "all";
    }
}

inline Season parse_season(const std::string& s) {
    if (s == "winter") return Season::winter;
    if (s == "spring") return Season::spring;
    if (s == "summer") return Season::summer;
    if (s == "autumn") return Season::autumn;
    if (s == "all") return Season::all;
    throw config_error("unknown season: " + s);
}

inline bool month_in_season(int month, Season s) {
    switch (s) {
        case Season::winter: return month == 12 || month <= 2;
        case Season::spring: return month >= 3 && month <= 5;
        case Season::summer: return month >= 6 && month <= 8;
        case Season::autumn: return month >= 9 && month <= 11;
        default: return true;
    }
}

// A December opens the winter labeled by its own year; the following
// January and February belong to that same winter.
inline int winter_year(const YearMonth& ym) {
    return ym.month == 12 ? ym.year : ym.year - 1;
}

enum class VarPair { temp_prec, temp_wind, prec_wind };

inline const char* pair_name(VarPair p) {
    switch (p) {
        case VarPair::temp_prec: return "temp-prec";
        case VarPair::temp_wind: return "temp-wind";
        default: return "prec-wind";
    }
}

inline VarPair parse_pair(const std::string& s) {
    if (s == "temp-prec") return VarPair::temp_prec;
    if (s == "temp-wind") return VarPair::temp_wind;
    if (s == "prec-wind") return VarPair::prec_wind;
    throw config_error("unknown variable pair: " + s);
}

namespace detail {

struct RawCell {
    std::optional<double> temp, prec, wind;
};

inline std::optional<double> parse_cell(const std::string& s, int lineno) {
    if (s == "NA") return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        if (!std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw data_error("line " + std::to_string(lineno) +
                         ": unparseable value '" + s + "'");
    }
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

inline void impute_series(std::vector<std::optional<double>>& raw,
                          std::vector<double>& out, const std::string& id,
                          const char* what) {
    double sum = 0.0;
    int cnt = 0;
    for (const auto& v : raw)
        if (v) {
            sum += *v;
            ++cnt;
        }
    if (cnt == 0)
        throw data_error("station " + id + " has no observed " + what +
                         " values to impute from");
    const double mean = sum / cnt;
    out.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] ? *raw[i] : mean;
}

}  // namespace detail

// Load the station CSV: exact header, NA marks a missing value, every
// (station, month) cell becomes defined after station-mean imputation.
// Stations keep first-appearance order; months are sorted.
inline StationPanel load_stations(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw data_error("station file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kStationCsvHeader)
        throw data_error("bad station header, expected '" +
                         std::string(kStationCsvHeader) + "'");
    struct Meta {
        double lat, lon;
        std::string region;
        std::size_t order;
        std::map<YearMonth, detail::RawCell> cells;
    };
    std::map<std::string, Meta> by_id;
    std::vector<std::string> order;
    std::set<YearMonth> months;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 9)
            throw data_error("line " + std::to_string(lineno) + ": expected 9 "
                             "fields, got " + std::to_string(f.size()));
        const std::string& id = f[0];
        if (id.empty())
            throw data_error("line " + std::to_string(lineno) +
                             ": empty station id");
        double lat, lon;
        int year, month;
        try {
            lat = std::stod(f[1]);
            lon = std::stod(f[2]);
            year = std::stoi(f[4]);
            month = std::stoi(f[5]);
        } catch (const std::exception&) {
            throw data_error("line " + std::to_string(lineno) +
                             ": unparseable coordinates or date");
        }
        if (month < 1 || month > 12)
            throw data_error("line " + std::to_string(lineno) +
                             ": month out of range");
        detail::RawCell cell;
        cell.temp = detail::parse_cell(f[6], lineno);
        cell.prec = detail::parse_cell(f[7], lineno);
        cell.wind = detail::parse_cell(f[8], lineno);
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            Meta m;
            m.lat = lat;
            m.lon = lon;
            m.region = f[3];
            m.order = order.size();
            order.push_back(id);
            it = by_id.emplace(id, std::move(m)).first;
        } else if (it->second.lat != lat || it->second.lon != lon ||
                   it->second.region != f[3]) {
            throw data_error("line " + std::to_string(lineno) + ": station " +
                             id + " changes coordinates or region");
        }
        const YearMonth ym{year, month};
        if (it->second.cells.count(ym))
            throw data_error("line " + std::to_string(lineno) +
                             ": duplicate month for station " + id);
        it->second.cells[ym] = cell;
        months.insert(ym);
    }
    if (order.empty()) throw data_error("station file has no stations");

    StationPanel panel;
    panel.months.assign(months.begin(), months.end());
    panel.stations.resize(order.size());
    for (std::size_t s = 0; s < order.size(); ++s) {
        const Meta& m = by_id.at(order[s]);
        StationRecord& rec = panel.stations[s];
        rec.id = order[s];
        rec.lat = m.lat;
        rec.lon = m.lon;
        rec.region = m.region;
        std::vector<std::optional<double>> t, p, w;
        for (const auto& ym : panel.months) {
            const auto it = m.cells.find(ym);
            if (it == m.cells.end()) {
                t.emplace_back();
                p.emplace_back();
                w.emplace_back();
            } else {
                t.push_back(it->second.temp);
                p.push_back(it->second.prec);
                w.push_back(it->second.wind);
            }
        }
        detail::impute_series(t, rec.temp, rec.id, "temp");
        detail::impute_series(p, rec.prec, rec.id, "prec");
        detail::impute_series(w, rec.wind, rec.id, "wind");
    }

    double lat_lo = panel.stations[0].lat, lat_hi = lat_lo;
    double lon_lo = panel.stations[0].lon, lon_hi = lon_lo;
    for (const auto& s : panel.stations) {
        lat_lo = std::min(lat_lo, s.lat);
        lat_hi = std::max(lat_hi, s.lat);
        lon_lo = std::min(lon_lo, s.lon);
        lon_hi = std::max(lon_hi, s.lon);
    }
    panel.coords.resize(panel.stations.size());
    for (std::size_t s = 0; s < panel.stations.size(); ++s) {
        const double x =
            lon_hi > lon_lo
                ? (panel.stations[s].lon - lon_lo) / (lon_hi - lon_lo)
                : 0.5;
        const double y =
            lat_hi > lat_lo
                ? (panel.stations[s].lat - lat_lo) / (lat_hi - lat_lo)
                : 0.5;
        panel.coords[s] = {x, y};
    }
    return panel;
}

// Serialize a panel back to the input CSV format. %.17g keeps every
// surviving double bit-exact through a reload.
inline std::string write_stations_csv(const StationPanel& panel) {
    std::string out = std::string(kStationCsvHeader) + "\n";
    char buf[512];
    for (const auto& s : panel.stations) {
        for (std::size_t m = 0; m < panel.months.size(); ++m) {
            std::snprintf(buf, sizeof(buf),
                          "%s,%.17g,%.17g,%s,%d,%d,%.17g,%.17g,%.17g\n",
                          s.id.c_str(), s.lat, s.lon, s.region.c_str(),
                          panel.months[m].year, panel.months[m].month,
                          s.temp[m], s.prec[m], s.wind[m]);
            out += buf;
        }
    }
    return out;
}

namespace detail {

inline const std::vector<double>& series_of(const StationRecord& s,
                                            VarPair p, bool second) {
    switch (p) {
        case VarPair::temp_prec: return second ? s.prec : s.temp;
        case VarPair::temp_wind: return second ? s.wind : s.temp;
        default: return second ? s.wind : s.prec;
    }
}

}  // namespace detail

struct StationTestOutcome {
    std::string id;
    std::string region;
    TestResult result;
    // Nonempty when this station's test failed; other stations proceed.
    std::string error;
};

// Independence test per station on the scalar monthly series of the
// chosen pair, distance |a - b|^beta. Failures are isolated per station.
inline std::vector<StationTestOutcome> per_station_tests(
    const StationPanel& panel, VarPair pair, const TestConfig& cfg,
    const DcovParams& params = {}) {
    cfg.validate();
    params.validate();
    std::vector<StationTestOutcome> out;
    out.reserve(panel.stations.size());
    for (std::size_t s = 0; s < panel.stations.size(); ++s) {
        const StationRecord& rec = panel.stations[s];
        StationTestOutcome o;
        o.id = rec.id;
        o.region = rec.region;
        try {
            const auto& a = detail::series_of(rec, pair, false);
            const auto& b = detail::series_of(rec, pair, true);
            std::vector<FieldRealization> xs(a.size()), ys(b.size());
            for (std::size_t m = 0; m < a.size(); ++m) {
                xs[m].values = {a[m]};
                ys[m].values = {b[m]};
            }
            LatticeNorm norm;
            const auto da = distance_matrix(xs, norm, params);
            const auto db = distance_matrix(ys, norm, params);
            o.result = bootstrap_test(da, db, cfg,
                                      static_cast<std::uint64_t>(s));
        } catch (const std::exception& e) {
            o.error = e.what();
        }
        out.push_back(std::move(o));
    }
    return out;
}

struct RegionalResult {
    std::string region;
    Season season = Season::all;
    VarPair pair = VarPair::temp_prec;
    TestResult result;
    int n_months = 0;
    int n_stations = 0;
};

// Regional field test: each qualifying month is one replication of the
// two fields observed at the region's stations, compared under the
// random-location norm. region "all" takes every station.
inline RegionalResult regional_field_test(const StationPanel& panel,
                                          const std::string& region,
                                          Season season, VarPair pair,
                                          const TestConfig& cfg,
                                          const DcovParams& params = {}) {
    cfg.validate();
    params.validate();
    std::vector<std::size_t> members;
    for (std::size_t s = 0; s < panel.stations.size(); ++s)
        if (region == "all" || panel.stations[s].region == region)
            members.push_back(s);
    if (members.size() < 2)
        throw config_error("region '" + region + "' has " +
                           std::to_string(members.size()) +
                           " stations, need at least 2");
    std::vector<std::size_t> month_idx;
    for (std::size_t m = 0; m < panel.months.size(); ++m)
        if (month_in_season(panel.months[m].month, season))
            month_idx.push_back(m);
    if (month_idx.size() < 4)
        throw config_error("season '" + std::string(season_name(season)) +
                           "' has " + std::to_string(month_idx.size()) +
                           " months, need at least 4");
    std::vector<FieldRealization> xs(month_idx.size()), ys(month_idx.size());
    for (std::size_t r = 0; r < month_idx.size(); ++r) {
        const std::size_t m = month_idx[r];
        xs[r].values.reserve(members.size());
        ys[r].values.reserve(members.size());
        for (std::size_t s : members) {
            xs[r].values.push_back(
                detail::series_of(panel.stations[s], pair, false)[m]);
            ys[r].values.push_back(
                detail::series_of(panel.stations[s], pair, true)[m]);
        }
    }
    RandomLocationNorm norm;
    const auto da = distance_matrix(xs, norm, params);
    const auto db = distance_matrix(ys, norm, params);
    RegionalResult out;
    out.region = region;
    out.season = season;
    out.pair = pair;
    out.result = bootstrap_test(da, db, cfg);
    out.n_months = static_cast<int>(month_idx.size());
    out.n_stations = static_cast<int>(members.size());
    return out;
}

inline std::string regional_results_csv(
    const std::vector<RegionalResult>& results) {
    std::string out = std::string(kRegionalCsvHeader) + "\n";
    char buf[256];
    for (const auto& r : results) {
        std::string rstat, quant;
        if (!r.result.undefined) {
            std::snprintf(buf, sizeof(buf), "%.12g", r.result.statistic);
            rstat = buf;
            std::snprintf(buf, sizeof(buf), "%.12g", r.result.quantile);
            quant = buf;
        }
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%s,%s,%d,%d,%d\n",
                      r.region.c_str(), season_name(r.season),
                      pair_name(r.pair), rstat.c_str(), quant.c_str(),
                      r.result.reject ? 1 : 0, r.n_months, r.n_stations);
        out += buf;
    }
    return out;
}

struct SyntheticPanelSpec {
    int n_stations = 50;
    int n_months = 120;
    // Dependence between temp and prec; wind stays independent.
    double rho = 0.0;
    int regions = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_stations < 2) throw config_error("need at least 2 stations");
        if (n_months < 4) throw config_error("need at least 4 months");
        if (!(rho >= 0.0) || !(rho <= 1.0))
            throw config_error("rho must lie in [0, 1]");
        if (regions < 1) throw config_error("need at least 1 region");
    }
};

// Synthetic monthly panel: station locations uniform on the unit square,
// spatial fields Gaussian with covariance exp(-dist / 0.3), months iid.
// prec blends temp with an independent field at weight rho; rho = 1 makes
// prec a bitwise copy of temp.
inline StationPanel make_synthetic_panel(const SyntheticPanelSpec& spec) {
    spec.validate();
    RngStream loc_rng(spec.seed, 0, purpose::locations);
    const int ns = spec.n_stations;
    std::vector<std::array<double, 2>> pts(static_cast<std::size_t>(ns));
    for (auto& pt : pts) {
        pt[0] = loc_rng.uniform();
        pt[1] = loc_rng.uniform();
    }
    Eigen::MatrixXd cov(ns, ns);
    for (int i = 0; i < ns; ++i) {
        for (int j = i; j < ns; ++j) {
            const double dx = pts[static_cast<std::size_t>(i)][0] -
                              pts[static_cast<std::size_t>(j)][0];
            const double dy = pts[static_cast<std::size_t>(i)][1] -
                              pts[static_cast<std::size_t>(j)][1];
            const double c = std::exp(-std::sqrt(dx * dx + dy * dy) / 0.3);
            cov(i, j) = c;
            cov(j, i) = c;
        }
    }
    detail::GaussianSampler sampler(cov);

    StationPanel panel;
    panel.stations.resize(static_cast<std::size_t>(ns));
    panel.coords.resize(static_cast<std::size_t>(ns));
    for (int s = 0; s < ns; ++s) {
        auto& rec = panel.stations[static_cast<std::size_t>(s)];
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "s%04d", s);
        rec.id = idbuf;
        rec.lon = -110.0 + 20.0 * pts[static_cast<std::size_t>(s)][0];
        rec.lat = 35.0 + 10.0 * pts[static_cast<std::size_t>(s)][1];
        char regbuf[32];
        std::snprintf(regbuf, sizeof(regbuf), "r%d", s % spec.regions + 1);
        rec.region = regbuf;
        rec.temp.resize(static_cast<std::size_t>(spec.n_months));
        rec.prec.resize(static_cast<std::size_t>(spec.n_months));
        rec.wind.resize(static_cast<std::size_t>(spec.n_months));
        panel.coords[static_cast<std::size_t>(s)] =
            pts[static_cast<std::size_t>(s)];
    }
    panel.months.resize(static_cast<std::size_t>(spec.n_months));
    for (int m = 0; m < spec.n_months; ++m)
        panel.months[static_cast<std::size_t>(m)] = {1980 + m / 12,
                                                     1 + m % 12};

    const double w = std::sqrt(1.0 - spec.rho * spec.rho);
    for (int m = 0; m < spec.n_months; ++m) {
        RngStream gen(spec.seed, static_cast<std::uint64_t>(m) + 1,
                      purpose::field_x);
        const FieldRealization temp = sampler.draw(gen);
        const FieldRealization ind = sampler.draw(gen);
        const FieldRealization wind = sampler.draw(gen);
        for (int s = 0; s < ns; ++s) {
            auto& rec = panel.stations[static_cast<std::size_t>(s)];
            const auto si = static_cast<std::size_t>(s);
            const auto mi = static_cast<std::size_t>(m);
            rec.temp[mi] = temp.values[si];
            rec.prec[mi] = spec.rho == 1.0
                               ? temp.values[si]
                               : spec.rho * temp.values[si] + w * ind.values[si];
            rec.wind[mi] = wind.values[si];
        }
    }
    return panel;
}

}  // namespace fieldcov
