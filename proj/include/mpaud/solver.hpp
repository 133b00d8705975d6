#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "mpaud/sensing.hpp"

namespace mpaud {

/// Bernoulli-Gaussian prior learned by EM: per-coefficient nonzero
/// probability (sparsity ratio) and the variance of the nonzero part.
struct Prior {
    Eigen::MatrixXd lambda;  ///< J x P sparsity ratios
    double gain_var = 1.0;   ///< rho^2, variance of the Gaussian component
};

/// EM noise-variance update style.
///  - Conditioned: measurement-domain posterior conditioned on y
///    (Gaussian combination of the model prediction F xi with variance
///    omega_bar and the observation with variance sigma2). Self-correcting
///    from a bad noise estimate and exact at the calibrated fixed point.
///  - UnitColumns / FrameNorm: unconditioned forms
///    sigma2 = ||y_p - F xi_p||^2 / Q + w * omega_bar_p with w = J/Q
///    (unit-norm-column convention) or w = 1 (actual column norms of a
///    row-orthonormal operator). Both are the large-sigma2 limit of the
///    conditioned update.
enum class NoiseUpdate { Conditioned, UnitColumns, FrameNorm };

struct SolverOptions {
    int max_iterations = 100;  ///< T
    /// Relative change of the posterior mean below which iteration stops
    /// early; 0 disables and always runs the full budget.
    double convergence_tol = 0.0;
    /// Weight of the fresh orthogonalized output in the message update,
    /// u <- (1-d) u_prev + d u_new (and likewise its variance). 1 is the
    /// undamped update, which is unstable for this operator family once
    /// the support estimate sharpens: the de-correlated linear stage
    /// amplifies support-aligned modes by -(J/Q - 1) and the structured
    /// measurement map keeps them aligned. The amplified mode alternates
    /// sign, so a moderate damping weight removes it.
    double damping = 0.7;
    /// Joint (row-coupled) sparsity update across measurement vectors;
    /// when false each (j,p) keeps its own ratio.
    bool joint_sparsity = true;
    NoiseUpdate noise_update = NoiseUpdate::Conditioned;
    /// Re-estimate the Gaussian component variance every iteration
    /// instead of freezing the moment-matched initial value.
    bool refresh_gain_var = false;
    double snr0 = 100.0;  ///< SNR assumed by the noise-variance initializer
    bool record_trace = true;
    /// Use the (1+c)^2 variant of the sparsity initializer instead of
    /// the (1+c^2) one (kept for comparison; the latter is standard).
    bool init_alt_reading = false;
    /// Start the NLE error variance at 1 instead of the moment-matched
    /// per-entry signal energy. The energy-matched start makes the
    /// variance tracker valid from the first iteration.
    bool unit_initial_nle_var = false;
};

/// Per-iteration solver quantities, all P measurement vectors jointly.
struct SolverState {
    MatrixXc r;                ///< J x P pseudo-observations (LE output)
    Eigen::VectorXd tau2;      ///< P, LE error variances
    MatrixXc u;                ///< J x P orthogonalized NLE outputs
    Eigen::VectorXd v2;        ///< P, NLE error variances
    MatrixXc xi;               ///< J x P posterior means
    Eigen::MatrixXd omega;     ///< J x P posterior variances
    Eigen::MatrixXd eta;       ///< J x P belief indicators
    Eigen::VectorXd omega_bar; ///< P, mean posterior variance
    Eigen::VectorXd psi2;      ///< P, Gaussian-component posterior variance
    double sigma2 = 0.0;       ///< learned noise variance
    int iteration = 0;
    int budget = 0;            ///< T
    int clamp_events = 0;      ///< times omega_bar hit the tau2 ceiling
    bool degenerate_init = false;  ///< all-zero measurements at init

    // Accumulators for the optional gain-variance refresh.
    double active_mass = 0.0;
    double active_second_moment = 0.0;
};

struct TraceRow {
    int iteration;
    int subcarrier;       ///< p, 0-based
    double tau2;
    double v2;
    double sigma2;
    double mean_lambda;
};

struct SolverOutput {
    MatrixXc h_hat;           ///< J x P estimate (posterior mean at the last iteration)
    Eigen::MatrixXd eta;      ///< J x P final belief indicators
    Eigen::MatrixXd lambda;   ///< learned sparsity ratios
    double sigma2 = 0.0;      ///< learned noise variance
    double gain_var = 0.0;
    int iterations_run = 0;
    int clamp_events = 0;
    bool degenerate_init = false;
    std::vector<TraceRow> trace;
};

namespace detail {

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

constexpr double kVarianceFloor = 1e-12;
constexpr double kLambdaClip = 1e-12;
constexpr double kOmegaBarCeiling = 1.0 - 1e-6;

inline double clip_lambda(double l) {
    return std::min(std::max(l, kLambdaClip), 1.0 - kLambdaClip);
}

}  // namespace detail

/// Sparsity-ratio initializer: the largest ratio for which a noiseless
/// counting argument still predicts recovery at undersampling Q/J,
/// found by a 1-D grid search over c in (0, 10].
inline double init_sparsity_ratio(double q_over_j, bool alt_reading = false) {
    if (!(q_over_j > 0.0)) throw std::invalid_argument("init_sparsity_ratio: Q/J must be positive");
    const double j_over_q = 1.0 / q_over_j;
    double best = 0.0;
    constexpr double kStep = 1e-4;
    for (double c = kStep; c <= 10.0; c += kStep) {
        const double shrink = alt_reading
                                  ? (1.0 + c) * (1.0 + c) * detail::std_normal_cdf(-c) -
                                        c * detail::std_normal_pdf(c)
                                  : (1.0 + c * c) * detail::std_normal_cdf(-c) -
                                        c * detail::std_normal_pdf(c);
        const double num = 1.0 - 2.0 * j_over_q * shrink;
        const double den = 1.0 + c * c - 2.0 * shrink;
        if (den <= 0.0) continue;
        best = std::max(best, num / den);
    }
    return detail::clip_lambda(q_over_j * best);
}

/// LE error-variance tracker: tau2 = ((J-Q)/Q) v2 + (J/Q) sigma2.
inline double le_error_variance(double j, double q, double v2, double sigma2) {
    return (j - q) / q * v2 + j / q * sigma2;
}

/// NLE error-variance tracker, the safe form of (1/omega_bar - 1/tau2)^-1.
inline double nle_error_variance(double omega_bar, double tau2) {
    return omega_bar * tau2 / (tau2 - omega_bar);
}

/// Scalar Bernoulli-Gaussian posterior under the observation model
/// r = h + sqrt(obs_var) * z with h ~ (1-lambda) delta0 + lambda CN(0, gain_var).
/// Evaluated in the log domain so that large |r|^2/obs_var cannot underflow
/// the mixture weights.
struct BgPosterior {
    Complex mean;
    double var;
    double belief;
};

inline BgPosterior bg_posterior(Complex r, double lambda, double gain_var, double obs_var) {
    lambda = detail::clip_lambda(lambda);
    const double sum_var = gain_var + obs_var;
    const double abs2 = std::norm(r);
    const double log_a = std::log1p(-lambda) - std::log(M_PI * obs_var) - abs2 / obs_var;
    const double log_b = std::log(lambda) - std::log(M_PI * sum_var) - abs2 / sum_var;
    const double belief = 1.0 / (1.0 + std::exp(log_a - log_b));
    const Complex kappa = r * (gain_var / sum_var);
    const double psi2 = gain_var * obs_var / sum_var;
    BgPosterior out;
    out.belief = belief;
    out.mean = belief * kappa;
    out.var = belief * psi2 + belief * (1.0 - belief) * std::norm(kappa);
    return out;
}

/// Initialize prior and state from the measurements alone: the sparsity
/// ratio from the undersampling-based grid search, the noise variance
/// from the received energy at an assumed SNR, and the Gaussian-component
/// variance by moment matching the measurement energy.
inline void init_params(const MeasurementSet& m, const SensingOperator& f,
                        const SolverOptions& opts, Prior& prior, SolverState& state) {
    const Eigen::Index J = f.cols();
    const Eigen::Index P = m.y.cols();
    const double Q = static_cast<double>(f.rows());
    if (m.y.rows() != f.rows()) throw std::invalid_argument("init_params: Y/F dimension mismatch");

    const double lambda0 = init_sparsity_ratio(Q / static_cast<double>(J), opts.init_alt_reading);
    prior.lambda = Eigen::MatrixXd::Constant(J, P, lambda0);

    const double mean_energy = m.y.squaredNorm() / static_cast<double>(P);
    const double sigma2_raw = mean_energy / ((opts.snr0 + 1.0) * Q);
    state.degenerate_init = (sigma2_raw <= 0.0);
    state.sigma2 = std::max(sigma2_raw, detail::kVarianceFloor);

    const double rho_f = f.frobenius_sq() / Q;
    const double rho2 = (mean_energy - Q * state.sigma2) / (Q * lambda0 * rho_f);
    prior.gain_var = std::max(rho2, detail::kVarianceFloor);

    // Per-entry prior second moment lambda0 * rho2: the error variance of
    // the all-zero starting estimate under the moment-matched prior.
    const double v2_init =
        opts.unit_initial_nle_var
            ? 1.0
            : std::max(lambda0 * prior.gain_var * rho_f, detail::kVarianceFloor);

    state.r = MatrixXc::Zero(J, P);
    state.u = MatrixXc::Zero(J, P);
    state.xi = MatrixXc::Zero(J, P);
    state.omega = Eigen::MatrixXd::Zero(J, P);
    state.eta = Eigen::MatrixXd::Zero(J, P);
    state.tau2 = Eigen::VectorXd::Zero(P);
    state.v2 = Eigen::VectorXd::Constant(P, v2_init);
    state.omega_bar = Eigen::VectorXd::Zero(P);
    state.psi2 = Eigen::VectorXd::Zero(P);
    state.iteration = 0;
    state.budget = opts.max_iterations;
    state.clamp_events = 0;
}

/// Linear estimator: de-correlated matched filter for a row-orthonormal
/// operator, plus its error-variance tracker.
///   r_p = u_p + (J/Q) F^H (y_p - F u_p)
///   tau2_p = ((J-Q)/Q) v2_p + (J/Q) sigma2
/// `fu` must equal F * state.u (cached by the caller to avoid one extra
/// structured product per iteration).
inline void le_step_cached(SolverState& state, const SensingOperator& f, const MeasurementSet& m,
                           const MatrixXc& fu) {
    const double J = static_cast<double>(f.cols());
    const double Q = static_cast<double>(f.rows());
    state.r = state.u + (J / Q) * f.apply_adjoint(m.y - fu);
    for (Eigen::Index p = 0; p < state.tau2.size(); ++p)
        state.tau2(p) = std::max(le_error_variance(J, Q, state.v2(p), state.sigma2),
                                 detail::kVarianceFloor);
}

inline void le_step(SolverState& state, const SensingOperator& f, const MeasurementSet& m) {
    le_step_cached(state, f, m, f.apply(state.u));
}

/// Nonlinear estimator: per-scalar Bernoulli-Gaussian posterior on the
/// pseudo-observations, followed by the divergence-free orthogonalized
/// output whose error variance satisfies 1/v2 = 1/omega_bar - 1/tau2.
inline void nle_step(SolverState& state, const Prior& prior) {
    const Eigen::Index J = state.r.rows();
    const Eigen::Index P = state.r.cols();
    const double rho2 = prior.gain_var;
    state.active_mass = 0.0;
    state.active_second_moment = 0.0;
    for (Eigen::Index p = 0; p < P; ++p) {
        const double tau2 = state.tau2(p);
        const double sum_var = rho2 + tau2;
        const double log_norm_a = -std::log(M_PI * tau2);
        const double log_norm_b = -std::log(M_PI * sum_var);
        const double gain = rho2 / sum_var;
        const double psi2 = rho2 * tau2 / sum_var;
        state.psi2(p) = psi2;
        double omega_acc = 0.0;
        for (Eigen::Index j = 0; j < J; ++j) {
            const double lam = detail::clip_lambda(prior.lambda(j, p));
            const Complex r = state.r(j, p);
            const double abs2 = std::norm(r);
            const double log_a = std::log1p(-lam) + log_norm_a - abs2 / tau2;
            const double log_b = std::log(lam) + log_norm_b - abs2 / sum_var;
            const double eta = 1.0 / (1.0 + std::exp(log_a - log_b));
            const Complex kappa = gain * r;
            const double kappa2 = std::norm(kappa);
            const double omega = eta * psi2 + eta * (1.0 - eta) * kappa2;
            state.eta(j, p) = eta;
            state.xi(j, p) = eta * kappa;
            state.omega(j, p) = omega;
            omega_acc += omega;
            state.active_mass += eta;
            state.active_second_moment += eta * (kappa2 + psi2);
        }
        double omega_bar = omega_acc / static_cast<double>(J);
        if (omega_bar >= detail::kOmegaBarCeiling * tau2) {
            omega_bar = detail::kOmegaBarCeiling * tau2;
            ++state.clamp_events;
        }
        state.omega_bar(p) = omega_bar;
        // u = v2 (xi/omega_bar - r/tau2) in a form that stays finite as
        // omega_bar -> 0.
        state.v2(p) = nle_error_variance(omega_bar, tau2);
        state.u.col(p) = (tau2 * state.xi.col(p) - omega_bar * state.r.col(p)) / (tau2 - omega_bar);
    }
}

/// EM parameter learning. The sparsity ratio is the posterior activity
/// belief, averaged across measurement vectors when joint sparsity is on
/// (all P channels share one support). The noise variance combines the
/// per-vector residual energy with the posterior-variance correction.
/// `fxi` must equal F * state.xi.
inline void em_update_cached(SolverState& state, Prior& prior, const SensingOperator& f,
                             const MeasurementSet& m, const MatrixXc& fxi,
                             const SolverOptions& opts) {
    const Eigen::Index J = state.r.rows();
    const Eigen::Index P = state.r.cols();
    const double Q = static_cast<double>(f.rows());

    if (opts.joint_sparsity) {
        for (Eigen::Index j = 0; j < J; ++j) {
            const double row_mean = state.eta.row(j).mean();
            prior.lambda.row(j).setConstant(row_mean);
        }
    } else {
        prior.lambda = state.eta;
    }

    double acc = 0.0;
    for (Eigen::Index p = 0; p < P; ++p) {
        const double resid = (m.y.col(p) - fxi.col(p)).squaredNorm() / Q;
        const double ob = state.omega_bar(p);
        switch (opts.noise_update) {
            case NoiseUpdate::Conditioned: {
                const double s2 = state.sigma2;
                const double denom = ob + s2;
                acc += (s2 * s2) / (denom * denom) * resid + ob * s2 / denom;
                break;
            }
            case NoiseUpdate::UnitColumns:
                acc += resid + static_cast<double>(J) / Q * ob;
                break;
            case NoiseUpdate::FrameNorm:
                acc += resid + ob;
                break;
        }
    }
    state.sigma2 = std::max(acc / static_cast<double>(P), detail::kVarianceFloor);

    if (opts.refresh_gain_var && state.active_mass > 0.0)
        prior.gain_var =
            std::max(state.active_second_moment / state.active_mass, detail::kVarianceFloor);
}

inline void em_update(SolverState& state, Prior& prior, const SensingOperator& f,
                      const MeasurementSet& m, const SolverOptions& opts) {
    em_update_cached(state, prior, f, m, f.apply(state.xi), opts);
}

/// Called once per iteration after the EM update; the state still holds
/// this iteration's r and tau2.
using IterationObserver = std::function<void(const SolverState&)>;

/// Full solve: init, then LE -> NLE -> EM per iteration. Throws if a
/// non-finite value appears, reporting the iteration index. Stops early
/// only when convergence_tol > 0 and the posterior mean has stabilized.
inline SolverOutput run_solver(const MeasurementSet& m, const SensingOperator& f,
                               const SolverOptions& opts = {},
                               const IterationObserver& observer = nullptr) {
    if (opts.max_iterations < 1) throw std::invalid_argument("run_solver: need T >= 1");
    Prior prior;
    SolverState state;
    init_params(m, f, opts, prior, state);

    const double J = static_cast<double>(f.cols());
    const double Q = static_cast<double>(f.rows());
    MatrixXc fu = MatrixXc::Zero(f.rows(), m.y.cols());  // F * u, u starts at 0
    SolverOutput out;
    out.degenerate_init = state.degenerate_init;

    const double damp = opts.damping;
    if (!(damp > 0.0) || damp > 1.0)
        throw std::invalid_argument("run_solver: damping must be in (0, 1]");
    MatrixXc u_prev;
    Eigen::VectorXd v2_prev;

    for (int t = 1; t <= opts.max_iterations; ++t) {
        state.iteration = t;
        le_step_cached(state, f, m, fu);
        const MatrixXc prev_xi = state.xi;
        if (damp < 1.0) {
            u_prev = state.u;
            v2_prev = state.v2;
        }
        nle_step(state, prior);
        if (damp < 1.0) {
            state.u = (1.0 - damp) * u_prev + damp * state.u;
            state.v2 = (1.0 - damp) * v2_prev + damp * state.v2;
        }
        const MatrixXc fxi = f.apply(state.xi);
        em_update_cached(state, prior, f, m, fxi, opts);

        if (!state.tau2.allFinite() || !state.v2.allFinite() || !std::isfinite(state.sigma2) ||
            !state.xi.allFinite())
            throw std::runtime_error("run_solver: non-finite value at iteration " +
                                     std::to_string(t));

        if (opts.record_trace) {
            for (Eigen::Index p = 0; p < m.y.cols(); ++p)
                out.trace.push_back({t, static_cast<int>(p), state.tau2(p), state.v2(p),
                                     state.sigma2, prior.lambda.col(p).mean()});
        }
        if (observer) observer(state);
        out.iterations_run = t;

        if (opts.convergence_tol > 0.0 && t > 1) {
            const double diff = (state.xi - prev_xi).norm();
            if (diff <= opts.convergence_tol * std::max(state.xi.norm(), 1e-300)) break;
        }

        if (t < opts.max_iterations) {
            // F r follows from F F^H = I without another structured product,
            // and u is a per-vector linear blend of xi and r.
            const MatrixXc fr = fu + (J / Q) * (m.y - fu);
            for (Eigen::Index p = 0; p < m.y.cols(); ++p) {
                const double tau2 = state.tau2(p);
                const double ob = state.omega_bar(p);
                fu.col(p) = (tau2 * fxi.col(p) - ob * fr.col(p)) / (tau2 - ob);
            }
        }
    }

    out.h_hat = state.xi;
    out.eta = state.eta;
    out.lambda = prior.lambda;
    out.sigma2 = state.sigma2;
    out.gain_var = prior.gain_var;
    out.clamp_events = state.clamp_events;
    return out;
}

}  // namespace mpaud
