// Command-line driver: Monte Carlo sweeps, single verbose trials and a
// quick self-test of the core invariants.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "mpaud/io.hpp"
#include "mpaud/mpaud.hpp"

namespace {

using namespace mpaud;

int cmd_sweep(const std::string& config_path, const std::string& out_override,
              std::int64_t seed_override, int threads_override) {
    ExperimentConfig cfg = ExperimentConfig::from_kv(KeyValueConfig::from_file(config_path));
    if (!out_override.empty()) cfg.out_path = out_override;
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (threads_override > 0) cfg.threads = threads_override;
    cfg.validate();

    const auto rows = run_sweep(cfg);
    int trials = 0, skips = 0;
    for (const auto& r : rows) {
        if (r.type == "trial") ++trials;
        if (r.type == "skip") ++skips;
    }
    std::cout << "wrote " << rows.size() << " rows (" << trials << " trial rows, " << skips
              << " skipped points) to " << cfg.out_path << "\n";
    for (const auto& r : rows)
        if (r.type == "mean")
            std::cout << "  G=" << r.point.symbols << " P=" << r.point.pilot_subcarriers
                      << " Ka=" << r.point.active_users << " snr=" << r.point.snr_db << "dB "
                      << r.algorithm << "/" << r.detector << ": aud_error=" << r.aud_error
                      << " nmse=" << r.nmse_db << " dB\n";
    return 0;
}

int cmd_single(const std::string& config_path, int symbols, int pilots, int ka, double snr,
               std::int64_t seed, const std::string& trace_path, const std::string& dump_prefix) {
    ExperimentConfig cfg = ExperimentConfig::from_kv(KeyValueConfig::from_file(config_path));
    cfg.validate();
    GridPoint pt;
    pt.symbols = symbols > 0 ? symbols : cfg.symbols.front();
    pt.pilot_subcarriers = pilots > 0 ? pilots : cfg.pilot_subcarriers.front();
    pt.active_users = ka >= 0 ? ka : cfg.active_users.front();
    pt.snr_db = std::isnan(snr) ? cfg.snr_db.front() : snr;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.solver.record_trace = true;

    std::cout << "point: K=" << cfg.population << " Ka=" << pt.active_users << " G=" << pt.symbols
              << " P=" << pt.pilot_subcarriers << " snr=" << pt.snr_db
              << "dB T=" << cfg.solver.max_iterations << " seed=" << cfg.seed << "\n";
    std::cout << "latency of " << pt.symbols
              << " symbols: " << symbol_latency(pt.symbols, cfg.ofdm) * 1e6 << " us\n";

    SolverOutput sol;
    const auto rows = run_trial(cfg, pt, 0, &sol);
    for (const auto& r : rows)
        std::cout << r.algorithm << "/" << r.detector << ": aud_error=" << r.aud_error
                  << " nmse=" << r.nmse_db << " dB wall=" << r.wall_ms << " ms\n";
    if (cfg.run_oamp) {
        std::cout << "solver: iterations=" << sol.iterations_run << " sigma2=" << sol.sigma2
                  << " gain_var=" << sol.gain_var << " clamp_events=" << sol.clamp_events << "\n";
        if (!trace_path.empty()) {
            export_trace_csv(trace_path, sol.trace);
            std::cout << "trace written to " << trace_path << "\n";
        }
    }

    if (!dump_prefix.empty()) {
        const std::uint64_t trial_seed = derive_trial_seed(cfg.seed, pt, 0);
        const TrialContext ctx = make_trial(cfg, pt, trial_seed);
        const double qj = static_cast<double>(ctx.op.rows()) * ctx.op.cols();
        if (qj > static_cast<double>(1 << 24)) {
            std::cerr << "dump: Q*J too large to materialize the dense operator\n";
            return 1;
        }
        write_complex_matrix(dump_prefix + "F.bin", ctx.op.dense());
        write_complex_matrix(dump_prefix + "Y.bin", ctx.meas.y);
        std::cout << "dumped " << dump_prefix << "F.bin and " << dump_prefix << "Y.bin\n";
    }
    return 0;
}

bool check(const char* name, bool ok) {
    std::printf("  [%s] %s\n", ok ? "PASS" : "FAIL", name);
    return ok;
}

/// Fast invariant suite over the core pieces; exits nonzero on failure.
int cmd_selftest() {
    bool all = true;
    Rng rng(7);

    {
        ArrayGeometry geom{2, 2, 2, 2, 3};
        bool unit = true;
        for (int i = 0; i < 20; ++i) {
            const double mu = rng.uniform(-M_PI, M_PI), nu = rng.uniform(-M_PI, M_PI);
            const VectorXc a = multi_panel_response(mu, nu, geom);
            for (Eigen::Index n = 0; n < a.size(); ++n)
                unit = unit && std::abs(std::abs(a(n)) - 1.0) < 1e-12;
        }
        all &= check("steering entries are unit modulus", unit);
    }
    {
        ArrayGeometry geom{2, 2, 2, 2, 4};
        Rng r2(11);
        PilotBook book = gen_pilots(12, 4, r2);
        std::vector<Combiner> combs;
        for (int g = 0; g < 4; ++g) combs.push_back(build_combiner(geom, r2));
        SensingOperator op = assemble_sensing(book, combs, geom);
        const MatrixXc f = op.dense();
        const double unitarity =
            (f * f.adjoint() - MatrixXc::Identity(op.rows(), op.rows())).cwiseAbs().maxCoeff();
        all &= check("sensing operator has orthonormal rows", unitarity < 1e-10);

        MatrixXc x(op.cols(), 2);
        for (Eigen::Index c = 0; c < x.cols(); ++c)
            for (Eigen::Index rr = 0; rr < x.rows(); ++rr) x(rr, c) = r2.cnormal();
        const double apply_err = (op.apply(x) - f * x).cwiseAbs().maxCoeff();
        all &= check("structured apply matches dense product", apply_err < 1e-10);

        const VectorXc xv = x.col(0);
        VectorXc yv(op.rows());
        for (Eigen::Index i = 0; i < yv.size(); ++i) yv(i) = r2.cnormal();
        const Complex lhs = (op.apply(xv).adjoint() * yv)(0, 0);
        const Complex rhs = (xv.adjoint() * op.apply_adjoint(yv))(0, 0);
        all &= check("apply and adjoint are exact adjoints", std::abs(lhs - rhs) < 1e-10);
    }
    {
        const BgPosterior post = bg_posterior(Complex{0, 0}, 0.5, 1.0, 1.0);
        all &= check("posterior belief anchor", std::abs(post.belief - 1.0 / 3.0) < 1e-12);
        const double v2 = 0.5 * 1.0 / (1.0 - 0.5);
        all &= check("error-variance anchor", std::abs(v2 - 1.0) < 1e-12);
    }
    {
        OfdmConfig ofdm{1e9, 256, 16, 30e9, 32};
        all &= check("symbol latency anchors",
                     symbol_latency(1, ofdm) == 0.288e-6 && symbol_latency(250, ofdm) == 72e-6 &&
                         symbol_latency(275, ofdm) == 79.2e-6);
    }
    std::printf("selftest: %s\n", all ? "all checks passed" : "FAILURES detected");
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint activity detection and channel estimation for multi-panel massive MIMO"};
    app.require_subcommand(1);

    std::string config_path, out_override, trace_path, dump_prefix;
    std::int64_t seed = -1;
    int threads = 0, symbols = 0, pilots = 0, ka = -1;
    double snr = std::numeric_limits<double>::quiet_NaN();

    auto* sweep = app.add_subcommand("sweep", "run a Monte Carlo sweep from a config file");
    sweep->add_option("config", config_path, "key = value config file")->required();
    sweep->add_option("--out", out_override, "output CSV path (overrides config)");
    sweep->add_option("--seed", seed, "master seed (overrides config)");
    sweep->add_option("--threads", threads, "worker threads (overrides config)");

    auto* single = app.add_subcommand("single", "run one trial with verbose output");
    single->add_option("config", config_path, "key = value config file")->required();
    single->add_option("--g", symbols, "OFDM symbol count G");
    single->add_option("--p", pilots, "pilot subcarrier count P");
    single->add_option("--ka", ka, "active user count");
    single->add_option("--snr", snr, "SNR in dB");
    single->add_option("--seed", seed, "master seed");
    single->add_option("--trace", trace_path, "write the solver trace CSV here");
    single->add_option("--dump", dump_prefix, "dump dense F and Y as <prefix>F.bin / <prefix>Y.bin");

    auto* selftest = app.add_subcommand("selftest", "run the built-in invariant checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep->parsed()) return cmd_sweep(config_path, out_override, seed, threads);
        if (single->parsed())
            return cmd_single(config_path, symbols, pilots, ka, snr, seed, trace_path, dump_prefix);
        if (selftest->parsed()) return cmd_selftest();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
