#pragma once

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bootstrap.hpp"
#include "core.hpp"
#include "dcov.hpp"
#include "errors.hpp"
#include "fields.hpp"
#include "norms.hpp"
#include "rng.hpp"

namespace fieldcov {

// Exact column set of the trial CSV. Append-only: reruns with the same
// experiment key skip trials already present in the file.
inline const char* kTrialCsvHeader =
    "experiment,family,scheme,q_or_p,n,rho,xi,B,M,trial,statistic,quantile,"
    "reject";

inline const char* kRateCsvHeader =
    "experiment,family,scheme,q_or_p,n,rho,xi,B,M,rate,trials,se";

struct McConfig {
    std::string experiment = "size";  // size | power | boxplot
    std::string family = "brownian";  // brownian | stable | fbs
    std::string scheme = "lattice";   // lattice | random | cell
    int q = 30;
    double intensity = 300.0;
    int n = 100;
    double rho = 0.0;
    double xi = 0.05;
    int B = 200;
    int M = 200;
    std::uint64_t seed = 0;
    double beta = 1.0;
    std::string variant = "dcor-resample";
    double alpha = 1.8;
    double c = 1.0;
    double hurst = 0.5;
    int threads = 1;
    std::string out;

    void validate() const {
        if (M < 10) throw config_error("Monte Carlo needs M >= 10");
        if (n < 4) throw config_error("Monte Carlo needs n >= 4");
        if (experiment != "size" && experiment != "power" &&
            experiment != "boxplot")
            throw config_error("unknown experiment: " + experiment);
        if (family != "brownian" && family != "stable" && family != "fbs")
            throw config_error("unknown family: " + family);
        if (scheme != "lattice" && scheme != "random" && scheme != "cell")
            throw config_error("unknown scheme: " + scheme);
        if (variant != "dcor-resample" && variant != "un-kernel")
            throw config_error("unknown test variant: " + variant);
        if (threads < 1) throw config_error("threads must be >= 1");
        DcovParams{beta}.validate();
        if (experiment != "boxplot")
            TestConfig{B, xi, TestVariant::dcor_resample, seed}.validate();
        if (scheme == "lattice") {
            if (q < 1) throw config_error("lattice resolution q must be >= 1");
        } else if (!(intensity > 0.0)) {
            throw config_error("location intensity must be positive");
        }
        if (family == "stable") {
            if (!(alpha > 0.0 && alpha < 2.0))
                throw config_error("stable family needs alpha in (0, 2)");
            StableParams{alpha, c}.validate();
        }
        if (family == "fbs" && (!(hurst > 0.0) || !(hurst < 1.0)))
            throw config_error("fbs family needs hurst in (0, 1)");
        if (!(rho >= 0.0) || !(rho <= 1.0))
            throw config_error("rho must lie in [0, 1]");
    }
};

// Flat key=value configuration, one pair per line, '#' starts a comment.
// Every key must be known; typos must not silently fall back to defaults.
inline McConfig parse_kv_config(std::istream& in, McConfig base = {}) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto notspace = line.find_first_not_of(" \t\r");
        if (notspace == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) +
                               ": expected key=value");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string()
                                          : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "experiment") base.experiment = val;
            else if (key == "family") base.family = val;
            else if (key == "scheme") base.scheme = val;
            else if (key == "q") base.q = std::stoi(val);
            else if (key == "intensity") base.intensity = std::stod(val);
            else if (key == "n") base.n = std::stoi(val);
            else if (key == "rho") base.rho = std::stod(val);
            else if (key == "xi") base.xi = std::stod(val);
            else if (key == "B") base.B = std::stoi(val);
            else if (key == "M") base.M = std::stoi(val);
            else if (key == "seed") base.seed = std::stoull(val);
            else if (key == "beta") base.beta = std::stod(val);
            else if (key == "variant") base.variant = val;
            else if (key == "alpha") base.alpha = std::stod(val);
            else if (key == "c") base.c = std::stod(val);
            else if (key == "hurst") base.hurst = std::stod(val);
            else if (key == "threads") base.threads = std::stoi(val);
            else if (key == "out") base.out = val;
            else
                throw config_error("config line " + std::to_string(lineno) +
                                   ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw config_error("config line " + std::to_string(lineno) +
                               ": bad value for '" + key + "'");
        } catch (const std::out_of_range&) {
            throw config_error("config line " + std::to_string(lineno) +
                               ": value out of range for '" + key + "'");
        }
    }
    return base;
}

struct RateRow {
    int n = 0;
    double rho = 0.0;
    double xi = 0.0;
    double rate = 0.0;
    int trials = 0;
    double se = 0.0;
};

struct RateTable {
    std::vector<RateRow> rows;
};

namespace detail {

inline std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return std::string(buf);
}

inline std::string fmt_stat(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::string(buf);
}

}  // namespace detail

// The first nine CSV columns; identical strings identify the same
// experiment for resume purposes.
inline std::string experiment_key(const McConfig& cfg) {
    const std::string q_or_p = cfg.scheme == "lattice"
                                   ? std::to_string(cfg.q)
                                   : detail::fmt_g(cfg.intensity);
    return cfg.experiment + "," + cfg.family + "," + cfg.scheme + "," +
           q_or_p + "," + std::to_string(cfg.n) + "," + detail::fmt_g(cfg.rho) +
           "," + detail::fmt_g(cfg.xi) + "," + std::to_string(cfg.B) + "," +
           std::to_string(cfg.M);
}

namespace detail {

// Everything an experiment shares across trials: the lattice or the one
// location set, any factored sampler, the norm, and the dependence blend.
class ExperimentContext {
public:
    explicit ExperimentContext(const McConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        params_.beta = cfg.beta;
        dep_.rho = cfg.rho;
        if (cfg.family == "stable") {
            dep_.family = Family::stable;
            dep_.alpha = cfg.alpha;
            stable_ = StableParams{cfg.alpha, cfg.c};
        } else {
            dep_.family = Family::gaussian;
        }
        if (cfg.scheme == "lattice") {
            lat_.d = 2;
            lat_.q = cfg.q;
            lat_.validate();
            if (cfg.family == "fbs")
                fbs_lat_.emplace(lat_, FbsParams{{cfg.hurst, cfg.hurst}});
        } else {
            RngStream locs_rng(cfg.seed, 0, purpose::locations);
            locs_ = sample_poisson_locations(cfg.intensity, 2, locs_rng);
            if (locs_.count() == 0)
                throw data_error("location draw came back empty; "
                                 "intensity too small");
            if (cfg.family == "stable") {
                stable_pts_.emplace(locs_.points, *stable_);
            } else {
                const double h = cfg.family == "fbs" ? cfg.hurst : 0.5;
                gauss_pts_.emplace(locs_.points, FbsParams{{h, h}});
            }
            if (cfg.scheme == "cell")
                cell_ = CellAverageSpec(2, locs_.count());
        }
    }

    const McConfig& cfg() const { return cfg_; }
    const LocationSet& locations() const { return locs_; }

    PairedSample draw_pair_sample(int trial) const {
        RngStream gen(cfg_.seed, static_cast<std::uint64_t>(trial),
                      purpose::field_x);
        PairedSample s;
        s.x.reserve(static_cast<std::size_t>(cfg_.n));
        s.y.reserve(static_cast<std::size_t>(cfg_.n));
        for (int i = 0; i < cfg_.n; ++i) {
            FieldRealization x = draw_field(gen);
            FieldRealization xp = draw_field(gen);
            s.y.push_back(make_dependent_pair(x, xp, dep_));
            s.x.push_back(std::move(x));
        }
        return s;
    }

    std::pair<DistanceMatrix, DistanceMatrix> distance_pair(
        const PairedSample& s) const {
        if (cfg_.scheme == "lattice") {
            LatticeNorm norm;
            return {distance_matrix(s.x, norm, params_),
                    distance_matrix(s.y, norm, params_)};
        }
        if (cfg_.scheme == "random") {
            RandomLocationNorm norm;
            return {distance_matrix(s.x, norm, params_),
                    distance_matrix(s.y, norm, params_)};
        }
        CellAverageNorm norm{cell_, &locs_.points};
        return {distance_matrix(s.x, norm, params_),
                distance_matrix(s.y, norm, params_)};
    }

    TestConfig test_config() const {
        TestConfig tc;
        tc.B = cfg_.B;
        tc.xi = cfg_.xi;
        tc.variant = cfg_.variant == "un-kernel" ? TestVariant::un_kernel
                                                : TestVariant::dcor_resample;
        tc.seed = cfg_.seed;
        return tc;
    }

private:
    FieldRealization draw_field(RngStream& gen) const {
        if (cfg_.scheme == "lattice") {
            if (cfg_.family == "fbs") return fbs_lat_->draw(gen);
            return simulate_increment_sheet_lattice(lat_, stable_, gen);
        }
        if (cfg_.family == "stable") return stable_pts_->draw(gen);
        return gauss_pts_->draw(gen);
    }

    McConfig cfg_;
    DcovParams params_;
    DependenceSpec dep_;
    LatticeSpec lat_;
    LocationSet locs_;
    std::optional<StableParams> stable_;
    std::optional<FbsLatticeSampler> fbs_lat_;
    std::optional<FbsPointsSampler> gauss_pts_;
    std::optional<StableSheetPointsSampler> stable_pts_;
    CellAverageSpec cell_;
};

// Run fn over the listed trials, emitting results in list order no matter
// which thread finishes first. emit runs on the calling thread.
template <class RowFn>
void run_ordered(const std::vector<int>& trials, int threads, RowFn fn,
                 const std::function<void(int, const std::string&)>& emit) {
    if (trials.empty()) return;
    if (threads <= 1) {
        for (int t : trials) emit(t, fn(t));
        return;
    }
    std::vector<std::optional<std::string>> slots(trials.size());
    std::mutex mu;
    std::condition_variable cv;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= trials.size()) return;
            try {
                std::string row = fn(trials[k]);
                std::lock_guard<std::mutex> lk(mu);
                slots[k] = std::move(row);
                cv.notify_all();
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu);
                if (!failure) failure = std::current_exception();
                slots[k] = std::string();
                cv.notify_all();
            }
        }
    };
    std::vector<std::thread> pool;
    const int nw = std::min<int>(threads, static_cast<int>(trials.size()));
    pool.reserve(static_cast<std::size_t>(nw));
    for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
    for (std::size_t k = 0; k < trials.size(); ++k) {
        std::unique_lock<std::mutex> lk(mu);
        cv.wait(lk, [&] { return slots[k].has_value(); });
        if (failure) break;
        std::string row = std::move(*slots[k]);
        slots[k].reset();
        lk.unlock();
        emit(trials[k], row);
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

// Scan an existing trial CSV for rows of this experiment; returns
// trial -> reject flag (-1 when the reject column is empty).
inline std::map<int, int> scan_existing(const std::string& path,
                                        const std::string& key) {
    std::map<int, int> found;
    std::ifstream in(path);
    if (!in) return found;
    std::string line;
    const std::string prefix = key + ",";
    while (std::getline(in, line)) {
        if (line.compare(0, prefix.size(), prefix) != 0) continue;
        std::stringstream rest(line.substr(prefix.size()));
        std::string trial_s, stat_s, q_s, rej_s;
        std::getline(rest, trial_s, ',');
        std::getline(rest, stat_s, ',');
        std::getline(rest, q_s, ',');
        std::getline(rest, rej_s, ',');
        try {
            const int trial = std::stoi(trial_s);
            found[trial] = rej_s.empty() ? -1 : std::stoi(rej_s);
        } catch (const std::exception&) {
            throw data_error("unparseable trial row in " + path);
        }
    }
    return found;
}

}  // namespace detail

struct ExperimentOutput {
    RateTable table;
    // All trial lines of this run in trial order, resumed rows excluded.
    std::vector<std::string> new_rows;
    int rejects = 0;
    int undefined = 0;
};

// Size and power studies share this runner; size pins rho = 0. The test
// itself is injectable so the aggregation can be exercised with stubs.
template <class TestFn>
ExperimentOutput run_rate_experiment_with(const McConfig& cfg, TestFn test_fn,
                                          std::ostream* echo = nullptr) {
    detail::ExperimentContext ctx(cfg);
    const std::string key = experiment_key(cfg);
    std::map<int, int> have;
    if (!cfg.out.empty()) have = detail::scan_existing(cfg.out, key);
    std::vector<int> todo;
    for (int t = 0; t < cfg.M; ++t)
        if (!have.count(t)) todo.push_back(t);

    std::ofstream out;
    if (!cfg.out.empty()) {
        const bool fresh = [&] {
            std::ifstream probe(cfg.out);
            return !probe || probe.peek() == std::ifstream::traits_type::eof();
        }();
        out.open(cfg.out, std::ios::app);
        if (!out) throw data_error("cannot open " + cfg.out);
        if (fresh) out << kTrialCsvHeader << "\n";
    }

    ExperimentOutput result;
    std::map<int, int> rejects = have;
    std::mutex agg_mu;
    auto one_trial = [&](int trial) {
        const PairedSample s = ctx.draw_pair_sample(trial);
        const auto [da, db] = ctx.distance_pair(s);
        const TestResult r =
            test_fn(da, db, ctx.test_config(),
                    static_cast<std::uint64_t>(trial));
        std::string line = key + "," + std::to_string(trial) + "," +
                           detail::fmt_stat(r.statistic) + "," +
                           detail::fmt_stat(r.quantile) + "," +
                           (r.reject ? "1" : "0");
        {
            std::lock_guard<std::mutex> lk(agg_mu);
            rejects[trial] = r.reject ? 1 : 0;
            if (r.undefined) ++result.undefined;
        }
        return line;
    };
    detail::run_ordered(todo, cfg.threads, one_trial,
                        [&](int, const std::string& line) {
                            if (out.is_open()) out << line << "\n";
                            if (echo) *echo << line << "\n";
                            result.new_rows.push_back(line);
                        });
    if (out.is_open()) out.flush();

    int rej = 0;
    for (const auto& [trial, flag] : rejects)
        if (flag == 1) ++rej;
    result.rejects = rej;
    RateRow row;
    row.n = cfg.n;
    row.rho = cfg.rho;
    row.xi = cfg.xi;
    row.trials = cfg.M;
    row.rate = static_cast<double>(rej) / cfg.M;
    row.se = std::sqrt(row.rate * (1.0 - row.rate) / cfg.M);
    result.table.rows.push_back(row);
    return result;
}

inline ExperimentOutput run_size_experiment(McConfig cfg,
                                            std::ostream* echo = nullptr) {
    cfg.experiment = "size";
    cfg.rho = 0.0;
    return run_rate_experiment_with(
        cfg,
        [](const DistanceMatrix& a, const DistanceMatrix& b,
           const TestConfig& tc, std::uint64_t rep) {
            return bootstrap_test(a, b, tc, rep);
        },
        echo);
}

inline ExperimentOutput run_power_experiment(McConfig cfg,
                                             std::ostream* echo = nullptr) {
    cfg.experiment = "power";
    return run_rate_experiment_with(
        cfg,
        [](const DistanceMatrix& a, const DistanceMatrix& b,
           const TestConfig& tc, std::uint64_t rep) {
            return bootstrap_test(a, b, tc, rep);
        },
        echo);
}

// Boxplot study: the raw correlations, no testing. Quantile and reject
// columns stay empty.
inline ExperimentOutput run_boxplot_experiment(McConfig cfg,
                                               std::ostream* echo = nullptr) {
    cfg.experiment = "boxplot";
    detail::ExperimentContext ctx(cfg);
    const std::string key = experiment_key(cfg);
    std::map<int, int> have;
    if (!cfg.out.empty()) have = detail::scan_existing(cfg.out, key);
    std::vector<int> todo;
    for (int t = 0; t < cfg.M; ++t)
        if (!have.count(t)) todo.push_back(t);

    std::ofstream out;
    if (!cfg.out.empty()) {
        const bool fresh = [&] {
            std::ifstream probe(cfg.out);
            return !probe || probe.peek() == std::ifstream::traits_type::eof();
        }();
        out.open(cfg.out, std::ios::app);
        if (!out) throw data_error("cannot open " + cfg.out);
        if (fresh) out << kTrialCsvHeader << "\n";
    }

    ExperimentOutput result;
    auto one_trial = [&](int trial) {
        const PairedSample s = ctx.draw_pair_sample(trial);
        const auto [da, db] = ctx.distance_pair(s);
        const DcovResult r = sample_dcov(da, db);
        const std::string stat = r.r_defined ? detail::fmt_stat(r.r_xy) : "";
        return key + "," + std::to_string(trial) + "," + stat + ",,";
    };
    detail::run_ordered(todo, cfg.threads, one_trial,
                        [&](int, const std::string& line) {
                            if (out.is_open()) out << line << "\n";
                            if (echo) *echo << line << "\n";
                            result.new_rows.push_back(line);
                        });
    if (out.is_open()) out.flush();
    return result;
}

inline std::string serialize_rate_table(const McConfig& cfg,
                                        const RateTable& table) {
    std::string s = std::string(kRateCsvHeader) + "\n";
    const std::string key = experiment_key(cfg);
    for (const auto& row : table.rows) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%.12g,%d,%.12g", row.rate,
                      row.trials, row.se);
        s += key + "," + buf + "\n";
    }
    return s;
}

// Exact truncated evaluation of p^gamma * E[N^-gamma; N >= 1] for
// N ~ Poisson(p), in log space. The summation window of 20 standard
// deviations leaves truncation error far below double precision; inside
// the window, terms below 1e-16 of the running sum are dropped once the
// mode has passed.
inline double poisson_negative_moment_check(double p, double gamma) {
    if (!(p >= 1.0)) throw config_error("Poisson intensity must be >= 1");
    if (!(gamma > 0.0)) throw config_error("gamma must be positive");
    const double sd = std::sqrt(p);
    const long lo = std::max(1L, static_cast<long>(std::floor(p - 20.0 * sd)));
    const long hi = static_cast<long>(std::ceil(p + 20.0 * sd));
    double sum = 0.0;
    bool past_mode = false;
    for (long k = lo; k <= hi; ++k) {
        const double kd = static_cast<double>(k);
        const double logterm = -p + kd * std::log(p) - std::lgamma(kd + 1.0) -
                               gamma * std::log(kd);
        const double term = std::exp(logterm);
        sum += term;
        if (kd > p) past_mode = true;
        if (past_mode && term < 1e-16 * sum) break;
    }
    return std::pow(p, gamma) * sum;
}

// Gap between the discrete lattice norm and the exact L2 norm of f, for a
// ladder of resolutions. Strict decrease is the Riemann-sum sanity check.
template <class F>
std::vector<double> riemann_convergence_check(F f, double exact_l2, int d,
                                              const std::vector<int>& qs) {
    if (qs.empty()) throw config_error("need at least one resolution");
    std::vector<double> errs;
    errs.reserve(qs.size());
    for (int q : qs) {
        LatticeSpec lat{d, q};
        const auto sites = lat.sites();
        std::vector<double> vals(sites.size());
        for (std::size_t i = 0; i < sites.size(); ++i) vals[i] = f(sites[i]);
        errs.push_back(std::abs(lattice_norm(vals) - exact_l2));
    }
    return errs;
}

}  // namespace fieldcov
