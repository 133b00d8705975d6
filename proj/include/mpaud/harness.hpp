#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mpaud/config.hpp"
#include "mpaud/detect.hpp"
#include "mpaud/solver.hpp"
#include "mpaud/somp.hpp"

namespace mpaud {

/// Monte Carlo sweep definition: geometry, OFDM numerology, channel and
/// population parameters, plus lists of symbol counts G, pilot counts P,
/// active-user counts and SNRs that span the experiment grid.
struct ExperimentConfig {
    ArrayGeometry geometry{4, 4, 2, 2, 6};
    OfdmConfig ofdm{1e9, 256, 16, 30e9, 32};
    int paths = 4;
    double delay_max_s = -1.0;  ///< < 0 means 32 / bandwidth

    int population = 500;                      ///< K
    std::vector<int> active_users{50};         ///< K_a values
    std::vector<int> symbols{250};             ///< G values
    std::vector<int> pilot_subcarriers{16};    ///< P values
    std::vector<double> snr_db{30.0};

    int trials = 1;
    std::uint64_t seed = 1;
    int threads = 0;  ///< 0 = hardware concurrency

    SolverOptions solver;
    DetectorConfig detector;
    bool run_oamp = true;
    bool run_somp = false;
    int somp_max_blocks = 0;  ///< 0 = one block per truly active user
    double somp_residual_tol = 1e-6;
    NmseRows nmse_rows = NmseRows::ActiveOnly;
    NmseNorm nmse_norm = NmseNorm::FullMatrix;

    std::string out_path = "results.csv";
    bool record_timing = true;

    void validate() const {
        geometry.validate();
        if (geometry.panel_gap < 2)
            throw std::invalid_argument("ExperimentConfig: panel gap multiple must be >= 2");
        if (symbols.empty() || pilot_subcarriers.empty() || active_users.empty() || snr_db.empty())
            throw std::invalid_argument("ExperimentConfig: sweep lists must be non-empty");
        if (trials < 1) throw std::invalid_argument("ExperimentConfig: trials must be >= 1");
        if (population < 1) throw std::invalid_argument("ExperimentConfig: population must be >= 1");
        for (int ka : active_users)
            if (ka < 0 || ka > population)
                throw std::invalid_argument("ExperimentConfig: need 0 <= K_a <= K");
        for (int p : pilot_subcarriers) {
            OfdmConfig o = ofdm;
            o.pilot_subcarriers = p;
            o.validate();
        }
        if (!run_oamp && !run_somp)
            throw std::invalid_argument("ExperimentConfig: no algorithm selected");
    }

    double delay_max() const { return delay_max_s < 0 ? 32.0 / ofdm.bandwidth_hz : delay_max_s; }

    static ExperimentConfig from_kv(const KeyValueConfig& kv);
};

/// One cell of the sweep grid.
struct GridPoint {
    int symbols;             ///< G
    int pilot_subcarriers;   ///< P
    int active_users;        ///< K_a
    double snr_db;
};

/// One CSV row. `type` is "trial" for raw results, "mean"/"std" for the
/// per-point aggregates appended after the trials, and "skip" for
/// infeasible grid points.
struct ResultRow {
    std::string type;
    int population;
    GridPoint point;
    int iterations;
    int trial;                  ///< trial index, or trial count on aggregates
    std::uint64_t seed;         ///< derived trial seed (0 on aggregates)
    std::string algorithm;
    std::string detector;
    double aud_error = std::numeric_limits<double>::quiet_NaN();
    double nmse_db = std::numeric_limits<double>::quiet_NaN();
    double wall_ms = 0.0;
};

/// Transmission time of G OFDM symbols: G * (N_c + CP) / B_s seconds.
/// Computed with a single division so the standard anchor values come out
/// bit-exact.
inline double symbol_latency(int symbols, const OfdmConfig& ofdm) {
    ofdm.validate();
    return static_cast<double>(symbols) *
           (static_cast<double>(ofdm.subcarriers + ofdm.cyclic_prefix)) / ofdm.bandwidth_hz;
}

/// Deterministic per-trial seed from the master seed and the grid cell,
/// so any CSV row can be re-run in isolation from its own fields.
inline std::uint64_t derive_trial_seed(std::uint64_t master, const GridPoint& pt, int trial) {
    std::uint64_t h = master;
    auto mix = [&h](std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        splitmix64(h);
    };
    mix(static_cast<std::uint64_t>(pt.symbols));
    mix(static_cast<std::uint64_t>(pt.pilot_subcarriers));
    mix(static_cast<std::uint64_t>(pt.active_users));
    std::uint64_t snr_bits;
    static_assert(sizeof(snr_bits) == sizeof(pt.snr_db));
    std::memcpy(&snr_bits, &pt.snr_db, sizeof(snr_bits));
    mix(snr_bits);
    mix(static_cast<std::uint64_t>(trial));
    std::uint64_t state = h;
    return splitmix64(state);
}

/// Everything belonging to one synthesized trial instance.
struct TrialContext {
    ActivityPattern activity;
    ChannelMatrix channel;
    SensingOperator op;
    MeasurementSet meas;
};

/// Synthesize one trial: activity, per-user channels, pilots, combiners,
/// the stacked operator and the noisy measurements. Independent RNG
/// sub-streams per ingredient keep draws stable when one part changes.
inline TrialContext make_trial(const ExperimentConfig& cfg, const GridPoint& pt,
                               std::uint64_t trial_seed) {
    OfdmConfig ofdm = cfg.ofdm;
    ofdm.pilot_subcarriers = pt.pilot_subcarriers;
    ofdm.validate();
    const Rng root(trial_seed);
    Rng rng_activity = root.derive(1);
    Rng rng_paths = root.derive(2);
    Rng rng_pilots = root.derive(3);
    Rng rng_combiner = root.derive(4);
    Rng rng_noise = root.derive(5);

    TrialContext ctx;
    ctx.activity = draw_activity(cfg.population, pt.active_users, rng_activity);

    const int nbs = cfg.geometry.total_antennas();
    std::vector<MatrixXc> user_channels(cfg.population);
    for (int k = 0; k < cfg.population; ++k) {
        if (!ctx.activity.active[k]) continue;  // inactive users contribute zero blocks
        const PathParams paths = draw_paths(cfg.paths, cfg.delay_max(), rng_paths);
        user_channels[k] = synth_user_channel(paths, cfg.geometry, ofdm);
    }
    ctx.channel = build_channel_matrix(user_channels, ctx.activity, nbs, pt.pilot_subcarriers);

    PilotBook pilots = gen_pilots(cfg.population, pt.symbols, rng_pilots);
    std::vector<Combiner> combiners;
    combiners.reserve(pt.symbols);
    for (int g = 0; g < pt.symbols; ++g) combiners.push_back(build_combiner(cfg.geometry, rng_combiner));
    ctx.op = assemble_sensing(pilots, combiners, cfg.geometry);
    ctx.meas = simulate_received(ctx.op, ctx.channel, pt.snr_db, rng_noise);
    return ctx;
}

/// Run the algorithms and detectors of one trial and emit result rows.
/// When `solver_out` is non-null the full solver output is copied out for
/// inspection (used by the single-trial command).
inline std::vector<ResultRow> run_trial(const ExperimentConfig& cfg, const GridPoint& pt,
                                        int trial, SolverOutput* solver_out = nullptr) {
    const std::uint64_t trial_seed = derive_trial_seed(cfg.seed, pt, trial);
    const TrialContext ctx = make_trial(cfg, pt, trial_seed);
    const int nbs = cfg.geometry.total_antennas();

    std::vector<ResultRow> rows;
    auto base_row = [&](const char* algorithm, const char* detector) {
        ResultRow r;
        r.type = "trial";
        r.population = cfg.population;
        r.point = pt;
        r.iterations = cfg.solver.max_iterations;
        r.trial = trial;
        r.seed = trial_seed;
        r.algorithm = algorithm;
        r.detector = detector;
        return r;
    };
    using Clock = std::chrono::steady_clock;

    if (cfg.run_oamp) {
        const auto t0 = Clock::now();
        const SolverOutput sol = run_solver(ctx.meas, ctx.op, cfg.solver);
        const double wall_ms =
            cfg.record_timing
                ? std::chrono::duration<double, std::milli>(Clock::now() - t0).count()
                : 0.0;
        const double nmse =
            nmse_db(sol.h_hat, ctx.channel.h, ctx.activity.active, nbs, cfg.nmse_rows, cfg.nmse_norm);

        Eigen::Map<const MatrixXc> h_slice(sol.h_hat.col(0).data(), nbs, cfg.population);
        Eigen::Map<const Eigen::MatrixXd> eta_slice(sol.eta.col(0).data(), nbs, cfg.population);
        const DetectionResult cg = cg_ad(h_slice, cfg.detector);
        const DetectionResult bi = bi_ad(eta_slice, cfg.detector);

        ResultRow row_cg = base_row("oamp", "cg");
        row_cg.aud_error = aud_error_prob(cg.active, ctx.activity.active);
        row_cg.nmse_db = nmse;
        row_cg.wall_ms = wall_ms;
        rows.push_back(row_cg);

        ResultRow row_bi = base_row("oamp", "bi");
        row_bi.aud_error = aud_error_prob(bi.active, ctx.activity.active);
        row_bi.nmse_db = nmse;
        row_bi.wall_ms = wall_ms;
        rows.push_back(row_bi);

        if (solver_out) *solver_out = sol;
    }

    if (cfg.run_somp) {
        GreedyConfig gcfg;
        gcfg.block_aware = true;
        gcfg.block_size = nbs;
        const int max_blocks_fit = ctx.op.rows() / nbs;
        const int want_blocks = cfg.somp_max_blocks > 0 ? cfg.somp_max_blocks : pt.active_users;
        gcfg.max_support = std::min(want_blocks, max_blocks_fit) * nbs;
        gcfg.residual_tol = cfg.somp_residual_tol;

        const auto t0 = Clock::now();
        const SompResult sr = somp(ctx.meas.y, ctx.op, gcfg);
        const double wall_ms =
            cfg.record_timing
                ? std::chrono::duration<double, std::milli>(Clock::now() - t0).count()
                : 0.0;

        std::vector<std::uint8_t> alpha_hat(cfg.population, 0);
        for (int b : sr.blocks) alpha_hat[b] = 1;
        ResultRow row = base_row("somp", "support");
        row.aud_error = aud_error_prob(alpha_hat, ctx.activity.active);
        row.nmse_db =
            nmse_db(sr.h_hat, ctx.channel.h, ctx.activity.active, nbs, cfg.nmse_rows, cfg.nmse_norm);
        row.wall_ms = wall_ms;
        rows.push_back(row);
    }

    return rows;
}

namespace detail {

inline std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace detail

inline std::string csv_header() {
    return "type,users,active_users,symbols,pilot_subcarriers,snr_db,iterations,trial,seed,"
           "algorithm,detector,aud_error,nmse_db,wall_ms";
}

inline std::string to_csv(const ResultRow& r) {
    std::string line;
    line += r.type;
    line += ',' + std::to_string(r.population);
    line += ',' + std::to_string(r.point.active_users);
    line += ',' + std::to_string(r.point.symbols);
    line += ',' + std::to_string(r.point.pilot_subcarriers);
    line += ',' + detail::format_double(r.point.snr_db);
    line += ',' + std::to_string(r.iterations);
    line += ',' + std::to_string(r.trial);
    line += ',' + (r.seed ? std::to_string(r.seed) : std::string{});
    line += ',' + r.algorithm;
    line += ',' + r.detector;
    line += ',' + detail::format_double(r.aud_error);
    line += ',' + detail::format_double(r.nmse_db);
    line += ',' + detail::format_double(r.wall_ms);
    return line;
}

/// Mean/std aggregate rows for one grid point, grouped by (algorithm,
/// detector) in first-seen order.
inline std::vector<ResultRow> aggregate_rows(const std::vector<ResultRow>& trials) {
    std::vector<std::pair<std::string, std::string>> groups;
    for (const auto& r : trials) {
        if (r.type != "trial") continue;
        const auto key = std::make_pair(r.algorithm, r.detector);
        if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
    }
    std::vector<ResultRow> out;
    for (const auto& [algo, det] : groups) {
        std::vector<const ResultRow*> members;
        for (const auto& r : trials)
            if (r.type == "trial" && r.algorithm == algo && r.detector == det)
                members.push_back(&r);
        if (members.empty()) continue;
        auto stats = [&](auto getter) {
            double mean = 0.0;
            for (const auto* r : members) mean += getter(*r);
            mean /= static_cast<double>(members.size());
            double var = 0.0;
            for (const auto* r : members) {
                const double d = getter(*r) - mean;
                var += d * d;
            }
            var /= static_cast<double>(members.size());
            return std::make_pair(mean, std::sqrt(var));
        };
        const auto [ae_mean, ae_std] = stats([](const ResultRow& r) { return r.aud_error; });
        const auto [nm_mean, nm_std] = stats([](const ResultRow& r) { return r.nmse_db; });
        const auto [wm_mean, wm_std] = stats([](const ResultRow& r) { return r.wall_ms; });

        ResultRow mean_row = *members.front();
        mean_row.type = "mean";
        mean_row.trial = static_cast<int>(members.size());
        mean_row.seed = 0;
        mean_row.aud_error = ae_mean;
        mean_row.nmse_db = nm_mean;
        mean_row.wall_ms = wm_mean;
        out.push_back(mean_row);

        ResultRow std_row = mean_row;
        std_row.type = "std";
        std_row.aud_error = ae_std;
        std_row.nmse_db = nm_std;
        std_row.wall_ms = wm_std;
        out.push_back(std_row);
    }
    return out;
}

/// Run the whole sweep: every grid point x trial, dispatched to a bounded
/// worker pool, merged in deterministic (grid, trial) order regardless of
/// completion order. Returns all rows in output order and, if out_path is
/// non-empty, writes them as CSV.
inline std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg) {
    cfg.validate();

    std::vector<GridPoint> grid;
    for (int g : cfg.symbols)
        for (int p : cfg.pilot_subcarriers)
            for (int ka : cfg.active_users)
                for (double snr : cfg.snr_db) grid.push_back({g, p, ka, snr});

    struct Task {
        int point;
        int trial;
    };
    std::vector<Task> tasks;
    std::vector<bool> feasible(grid.size(), true);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i].symbols > cfg.population || grid[i].symbols < 1) {
            feasible[i] = false;  // pilot book needs G distinct DFT columns
            continue;
        }
        for (int t = 0; t < cfg.trials; ++t) tasks.push_back({static_cast<int>(i), t});
    }

    std::vector<std::vector<ResultRow>> task_rows(tasks.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size() || failed.load()) return;
            try {
                task_rows[i] = run_trial(cfg, grid[tasks[i].point], tasks[i].trial);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failed.store(true);
                failure = e.what();
                return;
            }
        }
    };

    if (!tasks.empty()) {
        int nthreads = cfg.threads > 0 ? cfg.threads
                                       : std::max(1u, std::thread::hardware_concurrency());
        if (static_cast<std::size_t>(nthreads) > tasks.size())
            nthreads = static_cast<int>(tasks.size());
        std::vector<std::thread> pool;
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failed.load()) throw std::runtime_error("run_sweep: trial failed: " + failure);

    std::vector<ResultRow> rows;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!feasible[i]) {
            ResultRow skip;
            skip.type = "skip";
            skip.population = cfg.population;
            skip.point = grid[i];
            skip.iterations = cfg.solver.max_iterations;
            skip.trial = 0;
            skip.seed = 0;
            rows.push_back(skip);
            continue;
        }
        std::vector<ResultRow> point_rows;
        for (int t = 0; t < cfg.trials; ++t, ++cursor)
            for (const auto& r : task_rows[cursor]) point_rows.push_back(r);
        const auto aggs = aggregate_rows(point_rows);
        rows.insert(rows.end(), point_rows.begin(), point_rows.end());
        rows.insert(rows.end(), aggs.begin(), aggs.end());
    }

    if (!cfg.out_path.empty()) {
        std::ofstream out(cfg.out_path);
        if (!out) throw std::runtime_error("run_sweep: cannot write " + cfg.out_path);
        out << csv_header() << '\n';
        for (const auto& r : rows) out << to_csv(r) << '\n';
        if (!out) throw std::runtime_error("run_sweep: short write to " + cfg.out_path);
    }
    return rows;
}

/// Solver trace export (one row per iteration and measurement vector).
inline void export_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_trace_csv: cannot write " + path);
    out << "iteration,subcarrier,tau2,v2,sigma2,mean_lambda\n";
    for (const auto& t : trace)
        out << t.iteration << ',' << t.subcarrier << ',' << detail::format_double(t.tau2) << ','
            << detail::format_double(t.v2) << ',' << detail::format_double(t.sigma2) << ','
            << detail::format_double(t.mean_lambda) << '\n';
}

inline ExperimentConfig ExperimentConfig::from_kv(const KeyValueConfig& kv) {
    ExperimentConfig cfg;
    cfg.geometry.panels_h = kv.get_int("panels_h", cfg.geometry.panels_h);
    cfg.geometry.panels_v = kv.get_int("panels_v", cfg.geometry.panels_v);
    cfg.geometry.panel_ant_h = kv.get_int("panel_ant_h", cfg.geometry.panel_ant_h);
    cfg.geometry.panel_ant_v = kv.get_int("panel_ant_v", cfg.geometry.panel_ant_v);
    cfg.geometry.panel_gap = kv.get_int("panel_gap", cfg.geometry.panel_gap);
    cfg.ofdm.bandwidth_hz = kv.get_double("bandwidth_hz", cfg.ofdm.bandwidth_hz);
    cfg.ofdm.subcarriers = kv.get_int("subcarriers", cfg.ofdm.subcarriers);
    cfg.ofdm.carrier_hz = kv.get_double("carrier_hz", cfg.ofdm.carrier_hz);
    cfg.ofdm.cyclic_prefix = kv.get_int("cyclic_prefix", cfg.ofdm.cyclic_prefix);
    cfg.paths = kv.get_int("paths", cfg.paths);
    cfg.delay_max_s = kv.get_double("delay_max_s", cfg.delay_max_s);
    cfg.population = kv.get_int("users", cfg.population);

    auto to_int_list = [](const std::vector<double>& v) {
        std::vector<int> out;
        for (double d : v) out.push_back(static_cast<int>(d));
        return out;
    };
    cfg.active_users = to_int_list(kv.get_list("active_users", {50}));
    cfg.symbols = to_int_list(kv.get_list("symbols", {250}));
    cfg.pilot_subcarriers = to_int_list(kv.get_list("pilot_subcarriers", {16}));
    cfg.snr_db = kv.get_list("snr_db", {30.0});

    cfg.trials = kv.get_int("trials", cfg.trials);
    cfg.seed = static_cast<std::uint64_t>(kv.get_double("seed", 1));
    cfg.threads = kv.get_int("threads", cfg.threads);

    cfg.solver.max_iterations = kv.get_int("iterations", cfg.solver.max_iterations);
    cfg.solver.convergence_tol = kv.get_double("conv_tol", cfg.solver.convergence_tol);
    cfg.solver.joint_sparsity =
        kv.get_string("lambda_update", "joint") == "joint";
    const std::string nc = kv.get_string("noise_update", "conditioned");
    if (nc == "conditioned")
        cfg.solver.noise_update = NoiseUpdate::Conditioned;
    else if (nc == "frame")
        cfg.solver.noise_update = NoiseUpdate::FrameNorm;
    else if (nc == "unit_col")
        cfg.solver.noise_update = NoiseUpdate::UnitColumns;
    else
        throw std::runtime_error("config: noise_update must be conditioned, frame or unit_col");
    cfg.solver.refresh_gain_var = kv.get_bool("rho2_refresh", cfg.solver.refresh_gain_var);

    cfg.detector.bi_fraction = kv.get_double("p_bi", cfg.detector.bi_fraction);
    cfg.detector.cg_fraction = kv.get_double("p_cg", cfg.detector.cg_fraction);
    cfg.detector.bi_threshold = kv.get_double("eps_bi", cfg.detector.bi_threshold);

    const auto algos = kv.get_string_list("algorithms", {"oamp"});
    cfg.run_oamp = std::find(algos.begin(), algos.end(), "oamp") != algos.end();
    cfg.run_somp = std::find(algos.begin(), algos.end(), "somp") != algos.end();
    cfg.somp_max_blocks = kv.get_int("somp_max_blocks", cfg.somp_max_blocks);
    cfg.somp_residual_tol = kv.get_double("somp_tol", cfg.somp_residual_tol);

    const std::string rows = kv.get_string("nmse_rows", "active");
    if (rows == "active")
        cfg.nmse_rows = NmseRows::ActiveOnly;
    else if (rows == "all")
        cfg.nmse_rows = NmseRows::All;
    else
        throw std::runtime_error("config: nmse_rows must be active or all");
    const std::string norm = kv.get_string("nmse_norm", "full");
    if (norm == "full")
        cfg.nmse_norm = NmseNorm::FullMatrix;
    else if (norm == "per_subcarrier")
        cfg.nmse_norm = NmseNorm::PerSubcarrier;
    else
        throw std::runtime_error("config: nmse_norm must be full or per_subcarrier");

    cfg.out_path = kv.get_string("out", cfg.out_path);
    cfg.record_timing = kv.get_bool("timing", cfg.record_timing);
    return cfg;
}

}  // namespace mpaud
