#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

#include "mpaud/channel.hpp"
#include "mpaud/combiner.hpp"
#include "mpaud/pilots.hpp"

namespace mpaud {

/// Stacked measurement map F (Q x J, Q = G*N_P, J = K*N_BS). Row block g
/// equals scale * (s_g)^T (x) (W_g)^H with a global scale of 1/sqrt(K),
/// which together with distinct DFT pilots and orthonormal combiner
/// columns makes the rows of F orthonormal: F F^H = I_Q.
///
/// The operator is stored structurally (pilot book + one flat combiner
/// vector per symbol) and applied through the Kronecker factorization:
/// viewing a length-J vector as the N_BS x K matrix X,
///   block g of F x      = scale * W_g^H (X s_g)
///   adjoint contribution = scale * sum_g (W_g y_g) s_g^H
/// so products cost O(G * N_BS * K) instead of O(Q * J).
///
/// Immutable after assembly; apply/apply_adjoint are reentrant.
class SensingOperator {
  public:
    SensingOperator() = default;

    int rows() const { return static_cast<int>(num_symbols_) * num_panels_; }  ///< Q
    int cols() const { return static_cast<int>(pilots_.rows()) * antennas_; }  ///< J
    int num_symbols() const { return num_symbols_; }                           ///< G
    int num_panels() const { return num_panels_; }                             ///< N_P
    int antennas() const { return antennas_; }                                 ///< N_BS
    int population() const { return static_cast<int>(pilots_.rows()); }        ///< K
    double scale() const { return scale_; }
    const MatrixXc& pilot_matrix() const { return pilots_; }

    /// ||F||_F^2, computed structurally.
    double frobenius_sq() const {
        double acc = 0.0;
        for (const auto& f : flats_) acc += f.squaredNorm();
        return scale_ * scale_ * static_cast<double>(pilots_.rows()) * acc;
    }

    /// Y = F * X for X of shape J x P (or a single column).
    MatrixXc apply(const MatrixXc& x) const {
        check_cols(x.rows(), cols(), "apply");
        const int ncols = static_cast<int>(x.cols());
        MatrixXc out(rows(), ncols);
        for (int p = 0; p < ncols; ++p) {
            Eigen::Map<const MatrixXc> xmat(x.col(p).data(), antennas_, population());
            const MatrixXc t = xmat * pilots_;  // N_BS x G
            for (int g = 0; g < num_symbols_; ++g) {
                const VectorXc& w = flats_[g];
                Eigen::Index base = static_cast<Eigen::Index>(g) * num_panels_;
                for (int np = 0; np < num_panels_; ++np) out(base + np, p) = Complex{0, 0};
                for (int n = 0; n < antennas_; ++n)
                    out(base + panel_of_[n], p) += std::conj(w(n)) * t(n, g);
            }
        }
        return scale_ * out;
    }

    /// X = F^H * Y for Y of shape Q x P (or a single column).
    MatrixXc apply_adjoint(const MatrixXc& y) const {
        check_cols(y.rows(), rows(), "apply_adjoint");
        const int ncols = static_cast<int>(y.cols());
        MatrixXc out(cols(), ncols);
        MatrixXc c(antennas_, num_symbols_);
        for (int p = 0; p < ncols; ++p) {
            for (int g = 0; g < num_symbols_; ++g) {
                const VectorXc& w = flats_[g];
                const Eigen::Index base = static_cast<Eigen::Index>(g) * num_panels_;
                for (int n = 0; n < antennas_; ++n)
                    c(n, g) = w(n) * y(base + panel_of_[n], p);
            }
            Eigen::Map<MatrixXc> xmat(out.col(p).data(), antennas_, population());
            xmat.noalias() = scale_ * (c * pilots_.adjoint());
        }
        return out;
    }

    /// Dense Q x J materialization. Intended for small instances; the
    /// caller is responsible for keeping Q*J reasonable.
    MatrixXc dense() const {
        MatrixXc f(rows(), cols());
        for (int g = 0; g < num_symbols_; ++g) {
            const VectorXc& w = flats_[g];
            const Eigen::Index rbase = static_cast<Eigen::Index>(g) * num_panels_;
            for (int k = 0; k < population(); ++k) {
                const Complex pilot = pilots_(k, g);
                const Eigen::Index cbase = static_cast<Eigen::Index>(k) * antennas_;
                f.block(rbase, cbase, num_panels_, antennas_).setZero();
                for (int n = 0; n < antennas_; ++n)
                    f(rbase + panel_of_[n], cbase + n) = scale_ * pilot * std::conj(w(n));
            }
        }
        return f;
    }

    /// One column of F (sparse pattern densified), used by greedy solvers.
    VectorXc column(Eigen::Index j) const {
        VectorXc col = VectorXc::Zero(rows());
        const int k = static_cast<int>(j / antennas_);
        const int n = static_cast<int>(j % antennas_);
        for (int g = 0; g < num_symbols_; ++g)
            col(static_cast<Eigen::Index>(g) * num_panels_ + panel_of_[n]) =
                scale_ * pilots_(k, g) * std::conj(flats_[g](n));
        return col;
    }

    friend SensingOperator assemble_sensing(const PilotBook&, const std::vector<Combiner>&,
                                            const ArrayGeometry&);

  private:
    static void check_cols(Eigen::Index got, Eigen::Index want, const char* who) {
        if (got != want)
            throw std::invalid_argument(std::string(who) + ": dimension mismatch");
    }

    MatrixXc pilots_;              // K x G
    std::vector<VectorXc> flats_;  // per symbol, length N_BS
    std::vector<int> panel_of_;    // antenna -> panel
    int num_symbols_ = 0;
    int num_panels_ = 0;
    int antennas_ = 0;
    double scale_ = 1.0;
};

/// Stack G symbol blocks into one operator. The 1/sqrt(K) scale folded in
/// here is what turns the K * I_Q Gram of the raw blocks into exactly I_Q.
inline SensingOperator assemble_sensing(const PilotBook& pilots,
                                        const std::vector<Combiner>& combiners,
                                        const ArrayGeometry& geom) {
    if (combiners.size() != static_cast<std::size_t>(pilots.symbols()))
        throw std::invalid_argument("assemble_sensing: one combiner per symbol required");
    geom.validate();
    SensingOperator op;
    op.pilots_ = pilots.s;
    op.num_symbols_ = pilots.symbols();
    op.num_panels_ = geom.num_panels();
    op.antennas_ = geom.total_antennas();
    op.scale_ = 1.0 / std::sqrt(static_cast<double>(pilots.population()));
    op.panel_of_.resize(op.antennas_);
    for (int n = 0; n < op.antennas_; ++n) op.panel_of_[n] = geom.panel_of(n);
    op.flats_.reserve(combiners.size());
    for (const auto& c : combiners) {
        if (c.flat.size() != op.antennas_)
            throw std::invalid_argument("assemble_sensing: combiner size mismatch");
        op.flats_.push_back(c.flat);
    }
    return op;
}

/// Noisy measurements Y = F H + N together with the true noise level used.
struct MeasurementSet {
    MatrixXc y;              ///< Q x P
    double noise_var = 0.0;  ///< per-entry variance of N (sigma^2_true)
    double snr_db = 0.0;
};

/// Add complex white Gaussian noise calibrated against the mean per-entry
/// power of F*H in this realization. snr_db = +inf means noiseless.
inline MeasurementSet simulate_received(const SensingOperator& f, const ChannelMatrix& h,
                                        double snr_db, Rng& rng) {
    MeasurementSet m;
    m.snr_db = snr_db;
    m.y = f.apply(h.h);
    if (std::isinf(snr_db) && snr_db > 0) {
        m.noise_var = 0.0;
        return m;
    }
    if (!std::isfinite(snr_db)) throw std::invalid_argument("simulate_received: bad SNR");
    const double mean_power = m.y.squaredNorm() / static_cast<double>(m.y.size());
    if (mean_power <= 0.0)
        throw std::invalid_argument("simulate_received: zero signal with finite SNR");
    m.noise_var = mean_power / std::pow(10.0, snr_db / 10.0);
    for (Eigen::Index c = 0; c < m.y.cols(); ++c)
        for (Eigen::Index r = 0; r < m.y.rows(); ++r) m.y(r, c) += rng.cnormal(m.noise_var);
    return m;
}

}  // namespace mpaud
