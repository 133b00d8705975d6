// Minimal end-to-end example: synthesize one uplink frame, recover the
// channel and the active users, and print the detection scores.

#include <iostream>

#include "mpaud/mpaud.hpp"

int main() {
    using namespace mpaud;

    ExperimentConfig cfg;
    cfg.population = 100;
    cfg.solver.max_iterations = 60;
    GridPoint pt{/*symbols=*/60, /*pilot_subcarriers=*/8, /*active_users=*/10, /*snr_db=*/30.0};

    const TrialContext ctx = make_trial(cfg, pt, /*trial_seed=*/42);
    std::cout << "sensing operator: " << ctx.op.rows() << " x " << ctx.op.cols()
              << " (undersampling " << static_cast<double>(ctx.op.rows()) / ctx.op.cols() << ")\n";

    const SolverOutput sol = run_solver(ctx.meas, ctx.op, cfg.solver);
    const int nbs = cfg.geometry.total_antennas();

    Eigen::Map<const Eigen::MatrixXd> eta_slice(sol.eta.col(0).data(), nbs, cfg.population);
    const DetectionResult det = bi_ad(eta_slice);

    const double err = aud_error_prob(det.active, ctx.activity.active);
    const double nmse =
        nmse_db(sol.h_hat, ctx.channel.h, ctx.activity.active, nbs);

    std::cout << "true active users:";
    for (int k : ctx.activity.active_indices()) std::cout << ' ' << k;
    std::cout << "\ndetected:        ";
    for (int k = 0; k < cfg.population; ++k)
        if (det.active[k]) std::cout << ' ' << k;
    std::cout << "\naud error probability: " << err << "\n";
    std::cout << "channel estimate nmse: " << nmse << " dB\n";
    std::cout << "learned noise variance " << sol.sigma2 << " (true " << ctx.meas.noise_var
              << ")\n";
    return 0;
}
