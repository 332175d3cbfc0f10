#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fieldcov/fieldcov.hpp>

namespace fc = fieldcov;

namespace {

// Exit codes: 0 success, 1 usage or configuration, 2 defective data,
// 3 numerical failure.
constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumeric = 3;

struct McFlags {
    CLI::App* cmd = nullptr;
    std::string config_path;
    fc::McConfig cfg;

    void attach(CLI::App* app, bool with_test_flags) {
        cmd = app;
        app->add_option("--config", config_path,
                        "flat key=value config file, flags override it");
        app->add_option("--family", cfg.family,
                        "field family: brownian | stable | fbs");
        app->add_option("--scheme", cfg.scheme,
                        "observation scheme: lattice | random | cell");
        app->add_option("--q", cfg.q, "lattice resolution per axis");
        app->add_option("--intensity", cfg.intensity,
                        "Poisson intensity for random locations");
        app->add_option("--n", cfg.n, "replications per trial");
        app->add_option("--rho", cfg.rho, "dependence strength in [0, 1]");
        app->add_option("--M", cfg.M, "Monte Carlo trials");
        app->add_option("--beta", cfg.beta, "distance exponent in (0, 2)");
        app->add_option("--alpha", cfg.alpha, "stable index in (0, 2)");
        app->add_option("--c", cfg.c, "stable scale");
        app->add_option("--hurst", cfg.hurst, "Hurst exponent for fbs");
        app->add_option("--threads", cfg.threads,
                        "worker threads; output does not depend on it");
        app->add_option("--out", cfg.out, "append-only trial CSV path");
        app->add_option("--seed", cfg.seed, "master seed")->required();
        if (with_test_flags) {
            app->add_option("--B", cfg.B, "bootstrap resamples");
            app->add_option("--xi", cfg.xi, "test level in (0, 0.5]");
            app->add_option("--variant", cfg.variant,
                            "test variant: dcor-resample | un-kernel");
        }
    }

    // Config file first, then every flag the user actually passed.
    fc::McConfig resolve() const {
        fc::McConfig base;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in)
                throw fc::data_error("cannot open config " + config_path);
            base = fc::parse_kv_config(in, base);
        }
        fc::McConfig merged = base;
        auto take = [&](const char* name, auto member) {
            if (cmd->count(name) > 0) merged.*member = cfg.*member;
        };
        take("--family", &fc::McConfig::family);
        take("--scheme", &fc::McConfig::scheme);
        take("--q", &fc::McConfig::q);
        take("--intensity", &fc::McConfig::intensity);
        take("--n", &fc::McConfig::n);
        take("--rho", &fc::McConfig::rho);
        take("--M", &fc::McConfig::M);
        take("--beta", &fc::McConfig::beta);
        take("--alpha", &fc::McConfig::alpha);
        take("--c", &fc::McConfig::c);
        take("--hurst", &fc::McConfig::hurst);
        take("--threads", &fc::McConfig::threads);
        take("--out", &fc::McConfig::out);
        take("--seed", &fc::McConfig::seed);
        if (cmd->get_option_no_throw("--B")) {
            take("--B", &fc::McConfig::B);
            take("--xi", &fc::McConfig::xi);
            take("--variant", &fc::McConfig::variant);
        }
        return merged;
    }
};

struct PairInput {
    fc::PairedDump dump;
    std::string scheme;

    std::pair<fc::DistanceMatrix, fc::DistanceMatrix> distances(
        const fc::DcovParams& params) const {
        if (scheme == "lattice") {
            fc::LatticeNorm norm;
            return {fc::distance_matrix(dump.sample.x, norm, params),
                    fc::distance_matrix(dump.sample.y, norm, params)};
        }
        if (scheme == "random") {
            fc::RandomLocationNorm norm;
            return {fc::distance_matrix(dump.sample.x, norm, params),
                    fc::distance_matrix(dump.sample.y, norm, params)};
        }
        fc::CellAverageSpec spec(dump.locations.dim(),
                                 dump.locations.count());
        fc::CellAverageNorm norm{spec, &dump.locations.points};
        return {fc::distance_matrix(dump.sample.x, norm, params),
                fc::distance_matrix(dump.sample.y, norm, params)};
    }
};

PairInput load_pair_input(const std::string& path, std::string scheme,
                          int q_flag) {
    PairInput in;
    in.dump = fc::read_paired(path);
    if (scheme.empty())
        scheme = in.dump.lattice ? "lattice" : "random";
    if (scheme != "lattice" && scheme != "random" && scheme != "cell")
        throw fc::config_error("unknown scheme: " + scheme);
    if (scheme == "lattice" && !in.dump.lattice)
        throw fc::config_error(
            "dump holds randomly located fields, not a lattice");
    if (scheme != "lattice" && in.dump.lattice)
        throw fc::config_error("dump holds a lattice sample; use --scheme "
                               "lattice");
    if (q_flag > 0 && in.dump.lattice && q_flag != in.dump.lat.q)
        throw fc::config_error("--q " + std::to_string(q_flag) +
                               " does not match the dump's q = " +
                               std::to_string(in.dump.lat.q));
    in.scheme = scheme;
    return in;
}

std::string fmt12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

int run(int argc, char** argv) {
    CLI::App app{
        "Distance covariance independence tests for random fields on "
        "lattices and at random locations"};
    app.require_subcommand(1);

    // ---- simulate ----
    auto* sim = app.add_subcommand(
        "simulate", "draw a paired sample and write a binary dump");
    McFlags sim_flags;
    sim_flags.attach(sim, false);
    std::string sim_out;
    sim->add_option("--dump", sim_out, "output dump path")->required();
    sim->callback([&] {
        fc::McConfig cfg = sim_flags.resolve();
        cfg.experiment = "boxplot";  // no test settings involved
        cfg.validate();
        fc::detail::ExperimentContext ctx(cfg);
        const fc::PairedSample sample = ctx.draw_pair_sample(0);
        if (cfg.scheme == "lattice") {
            fc::LatticeSpec lat{2, cfg.q};
            fc::write_paired_lattice(sim_out, lat, sample);
        } else {
            fc::write_paired_points(sim_out, ctx.locations(), sample);
        }
        std::cout << "wrote " << sim_out << " with n = " << sample.n()
                  << "\n";
    });

    // ---- dcov ----
    auto* dc = app.add_subcommand(
        "dcov", "sample distance covariance and correlation of a dump");
    std::string dc_in, dc_scheme;
    int dc_q = 0;
    double dc_beta = 1.0;
    dc->add_option("--in", dc_in, "paired dump path")->required();
    dc->add_option("--scheme", dc_scheme,
                   "lattice | random | cell (default: from dump)");
    dc->add_option("--q", dc_q, "expected lattice resolution, checked");
    dc->add_option("--beta", dc_beta, "distance exponent in (0, 2)");
    dc->callback([&] {
        const PairInput in = load_pair_input(dc_in, dc_scheme, dc_q);
        const auto [da, db] = in.distances(fc::DcovParams{dc_beta});
        const fc::DcovResult r = fc::sample_dcov(da, db);
        std::cout << "T,R\n"
                  << fmt12(r.t_xy) << ","
                  << (r.r_defined ? fmt12(r.r_xy) : std::string()) << "\n";
    });

    // ---- test ----
    auto* ts = app.add_subcommand(
        "test", "bootstrap independence test on a dumped paired sample");
    std::string ts_in, ts_scheme, ts_variant = "dcor-resample";
    int ts_q = 0, ts_B = 200;
    double ts_beta = 1.0, ts_xi = 0.05;
    std::uint64_t ts_seed = 0;
    ts->add_option("--in", ts_in, "paired dump path")->required();
    ts->add_option("--scheme", ts_scheme,
                   "lattice | random | cell (default: from dump)");
    ts->add_option("--q", ts_q, "expected lattice resolution, checked");
    ts->add_option("--beta", ts_beta, "distance exponent in (0, 2)");
    ts->add_option("--B", ts_B, "bootstrap resamples");
    ts->add_option("--xi", ts_xi, "test level in (0, 0.5]");
    ts->add_option("--variant", ts_variant,
                   "dcor-resample | un-kernel");
    ts->add_option("--seed", ts_seed, "master seed")->required();
    ts->callback([&] {
        const PairInput in = load_pair_input(ts_in, ts_scheme, ts_q);
        const auto [da, db] = in.distances(fc::DcovParams{ts_beta});
        fc::TestConfig cfg;
        cfg.B = ts_B;
        cfg.xi = ts_xi;
        cfg.seed = ts_seed;
        if (ts_variant == "dcor-resample")
            cfg.variant = fc::TestVariant::dcor_resample;
        else if (ts_variant == "un-kernel")
            cfg.variant = fc::TestVariant::un_kernel;
        else
            throw fc::config_error("unknown test variant: " + ts_variant);
        const fc::TestResult r = fc::bootstrap_test(da, db, cfg);
        std::cout << "statistic,quantile,reject,undefined,B,xi,variant,seed\n"
                  << fc::serialize_test(r, cfg) << "\n";
    });

    // ---- mc-size / mc-power / mc-boxplot ----
    auto* msz = app.add_subcommand(
        "mc-size", "empirical size under independence; prints a rate table");
    McFlags msz_flags;
    msz_flags.attach(msz, true);
    msz->callback([&] {
        fc::McConfig cfg = msz_flags.resolve();
        cfg.experiment = "size";
        cfg.rho = 0.0;
        const fc::ExperimentOutput out = fc::run_size_experiment(cfg);
        std::cout << fc::serialize_rate_table(cfg, out.table);
    });

    auto* mpw = app.add_subcommand(
        "mc-power", "empirical power at the configured rho; prints a rate "
                    "table");
    McFlags mpw_flags;
    mpw_flags.attach(mpw, true);
    mpw->callback([&] {
        fc::McConfig cfg = mpw_flags.resolve();
        cfg.experiment = "power";
        const fc::ExperimentOutput out = fc::run_power_experiment(cfg);
        std::cout << fc::serialize_rate_table(cfg, out.table);
    });

    auto* mbx = app.add_subcommand(
        "mc-boxplot", "raw sample correlations per trial; prints trial rows");
    McFlags mbx_flags;
    mbx_flags.attach(mbx, false);
    mbx->callback([&] {
        fc::McConfig cfg = mbx_flags.resolve();
        cfg.experiment = "boxplot";
        std::cout << fc::kTrialCsvHeader << "\n";
        fc::run_boxplot_experiment(cfg, &std::cout);
    });

    // ---- check-poisson ----
    auto* cp = app.add_subcommand(
        "check-poisson",
        "exact truncated negative moment of a Poisson count");
    double cp_p = 1000.0, cp_gamma = 1.0;
    cp->add_option("--p", cp_p, "Poisson intensity, >= 1")->required();
    cp->add_option("--gamma", cp_gamma, "moment order, > 0")->required();
    cp->callback([&] {
        const double v = fc::poisson_negative_moment_check(cp_p, cp_gamma);
        std::cout << "p,gamma,value,abs_error\n"
                  << fmt12(cp_p) << "," << fmt12(cp_gamma) << "," << fmt12(v)
                  << "," << fmt12(std::abs(v - 1.0)) << "\n";
    });

    // ---- stations ----
    auto* st = app.add_subcommand(
        "stations", "monthly station panel tests (per station or regional)");
    std::string st_in, st_mode = "regional", st_region = "all",
                st_season = "all", st_pair = "temp-prec", st_write;
    bool st_synth = false;
    int st_stations = 50, st_months = 120, st_regions = 1, st_B = 200;
    double st_rho = 0.0, st_xi = 0.05, st_beta = 1.0;
    std::string st_variant = "dcor-resample";
    std::uint64_t st_seed = 0;
    st->add_option("--in", st_in, "station CSV path");
    st->add_flag("--synthetic", st_synth,
                 "generate a synthetic panel instead of reading --in");
    st->add_option("--stations", st_stations, "synthetic station count");
    st->add_option("--months", st_months, "synthetic month count");
    st->add_option("--rho", st_rho, "synthetic temp/prec dependence");
    st->add_option("--regions", st_regions, "synthetic region count");
    st->add_option("--mode", st_mode, "regional | per-station | none");
    st->add_option("--region", st_region, "region name or 'all'");
    st->add_option("--season", st_season,
                   "winter | spring | summer | autumn | all");
    st->add_option("--pair", st_pair,
                   "temp-prec | temp-wind | prec-wind");
    st->add_option("--B", st_B, "bootstrap resamples");
    st->add_option("--xi", st_xi, "test level in (0, 0.5]");
    st->add_option("--beta", st_beta, "distance exponent in (0, 2)");
    st->add_option("--variant", st_variant,
                   "dcor-resample | un-kernel");
    st->add_option("--write-csv", st_write,
                   "write the loaded or generated panel to this CSV");
    st->add_option("--seed", st_seed, "master seed")->required();
    st->callback([&] {
        fc::StationPanel panel;
        if (st_synth) {
            fc::SyntheticPanelSpec spec;
            spec.n_stations = st_stations;
            spec.n_months = st_months;
            spec.rho = st_rho;
            spec.regions = st_regions;
            spec.seed = st_seed;
            panel = fc::make_synthetic_panel(spec);
        } else {
            if (st_in.empty())
                throw fc::config_error("need --in or --synthetic");
            std::ifstream in(st_in);
            if (!in) throw fc::data_error("cannot open " + st_in);
            panel = fc::load_stations(in);
        }
        if (!st_write.empty()) {
            std::ofstream out(st_write, std::ios::trunc);
            if (!out) throw fc::data_error("cannot write " + st_write);
            out << fc::write_stations_csv(panel);
        }
        if (st_mode == "none") return;
        fc::TestConfig cfg;
        cfg.B = st_B;
        cfg.xi = st_xi;
        cfg.seed = st_seed;
        if (st_variant == "dcor-resample")
            cfg.variant = fc::TestVariant::dcor_resample;
        else if (st_variant == "un-kernel")
            cfg.variant = fc::TestVariant::un_kernel;
        else
            throw fc::config_error("unknown test variant: " + st_variant);
        const fc::DcovParams params{st_beta};
        const fc::VarPair pair = fc::parse_pair(st_pair);
        if (st_mode == "regional") {
            const fc::RegionalResult r = fc::regional_field_test(
                panel, st_region, fc::parse_season(st_season), pair, cfg,
                params);
            std::cout << fc::regional_results_csv({r});
        } else if (st_mode == "per-station") {
            const auto outcomes =
                fc::per_station_tests(panel, pair, cfg, params);
            std::cout << "station_id,region,statistic,quantile,reject,"
                         "undefined,error\n";
            for (const auto& o : outcomes) {
                if (o.error.empty()) {
                    std::cout << o.id << "," << o.region << ","
                              << fmt12(o.result.statistic) << ","
                              << fmt12(o.result.quantile) << ","
                              << (o.result.reject ? 1 : 0) << ","
                              << (o.result.undefined ? 1 : 0) << ",\n";
                } else {
                    std::string msg = o.error;
                    for (char& ch : msg)
                        if (ch == ',' || ch == '\n') ch = ';';
                    std::cout << o.id << "," << o.region << ",,,,," << msg
                              << "\n";
                }
            }
        } else {
            throw fc::config_error("unknown mode: " + st_mode);
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const fc::config_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kUsage;
    } catch (const fc::data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const fc::numeric_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumeric;
    }
}
