#pragma once

#include <stdexcept>
#include <vector>

#include "mpaud/array.hpp"
#include "mpaud/rng.hpp"

namespace mpaud {

/// OFDM numerology. P pilot subcarriers are picked uniformly from the
/// N_c available ones, so N_c must be a multiple of P.
struct OfdmConfig {
    double bandwidth_hz = 1e9;   ///< B_s
    int subcarriers = 256;       ///< N_c
    int pilot_subcarriers = 16;  ///< P
    double carrier_hz = 30e9;    ///< informational only
    int cyclic_prefix = 32;      ///< CP length in samples

    void validate() const {
        if (pilot_subcarriers < 1) throw std::invalid_argument("OfdmConfig: P must be >= 1");
        if (subcarriers < 1) throw std::invalid_argument("OfdmConfig: N_c must be >= 1");
        if (subcarriers % pilot_subcarriers != 0)
            throw std::invalid_argument("OfdmConfig: N_c must be a multiple of P");
        if (!(bandwidth_hz > 0)) throw std::invalid_argument("OfdmConfig: bandwidth must be positive");
    }

    /// Baseband frequency of pilot subcarrier p (1-based), in Hz.
    double pilot_freq(int p) const {
        return -bandwidth_hz / 2.0 +
               (static_cast<double>(p) * subcarriers / pilot_subcarriers - 1.0) *
                   bandwidth_hz / subcarriers;
    }
};

/// Multipath parameters of one user: L paths with complex gains,
/// virtual angles and delays. The azimuth/elevation pair is kept only
/// because the virtual angles are derived from it.
struct PathParams {
    std::vector<Complex> gain;     ///< beta_l ~ CN(0,1)
    std::vector<double> mu;        ///< horizontal virtual angle, pi*sin(az)*cos(el)
    std::vector<double> nu;        ///< vertical virtual angle, pi*sin(el)
    std::vector<double> delay_s;   ///< path delay, seconds
    std::vector<double> azimuth;
    std::vector<double> elevation;

    std::size_t num_paths() const { return gain.size(); }
};

/// Draw L paths: azimuth/elevation uniform on [-pi/2, pi/2), gains
/// CN(0,1), delays uniform on [0, delay_max].
inline PathParams draw_paths(int num_paths, double delay_max_s, Rng& rng) {
    if (num_paths < 1) throw std::invalid_argument("draw_paths: need at least one path");
    PathParams p;
    p.gain.resize(num_paths);
    p.mu.resize(num_paths);
    p.nu.resize(num_paths);
    p.delay_s.resize(num_paths);
    p.azimuth.resize(num_paths);
    p.elevation.resize(num_paths);
    for (int l = 0; l < num_paths; ++l) {
        p.azimuth[l] = rng.uniform(-M_PI / 2, M_PI / 2);
        p.elevation[l] = rng.uniform(-M_PI / 2, M_PI / 2);
        p.mu[l] = M_PI * std::sin(p.azimuth[l]) * std::cos(p.elevation[l]);
        p.nu[l] = M_PI * std::sin(p.elevation[l]);
        p.gain[l] = rng.cnormal(1.0);
        p.delay_s[l] = rng.uniform(0.0, delay_max_s);
    }
    return p;
}

/// Frequency-domain uplink channel of one user over the P pilot
/// subcarriers: column p is the sum over paths of the array response
/// weighted by gain and the delay-induced phase ramp.
inline MatrixXc synth_user_channel(const PathParams& paths, const ArrayGeometry& geom,
                                   const OfdmConfig& ofdm) {
    geom.validate();
    ofdm.validate();
    if (paths.num_paths() < 1) throw std::invalid_argument("synth_user_channel: no paths");
    const int nbs = geom.total_antennas();
    const int npilot = ofdm.pilot_subcarriers;
    MatrixXc h = MatrixXc::Zero(nbs, npilot);
    for (std::size_t l = 0; l < paths.num_paths(); ++l) {
        const VectorXc a = multi_panel_response(paths.mu[l], paths.nu[l], geom);
        for (int p = 1; p <= npilot; ++p) {
            const Complex phase = std::polar(1.0, -2.0 * M_PI * paths.delay_s[l] * ofdm.pilot_freq(p));
            h.col(p - 1) += paths.gain[l] * phase * a;
        }
    }
    return h;
}

/// Sparse activity pattern over the K-user population.
struct ActivityPattern {
    std::vector<std::uint8_t> active;  ///< alpha_k, length K
    int num_active = 0;                ///< K_a

    int population() const { return static_cast<int>(active.size()); }
    std::vector<int> active_indices() const {
        std::vector<int> idx;
        for (int k = 0; k < population(); ++k)
            if (active[k]) idx.push_back(k);
        return idx;
    }
};

/// Exactly K_a of K users active, chosen uniformly without replacement.
inline ActivityPattern draw_activity(int population, int num_active, Rng& rng) {
    if (num_active > population || num_active < 0 || population < 0)
        throw std::invalid_argument("draw_activity: need 0 <= K_a <= K");
    ActivityPattern pat;
    pat.active.assign(population, 0);
    pat.num_active = num_active;
    for (std::size_t idx : rng.sample_without_replacement(population, num_active))
        pat.active[idx] = 1;
    return pat;
}

/// Aggregated frequency-domain channel: J x P with J = K * N_BS.
/// Rows k*N_BS .. (k+1)*N_BS-1 of column p hold the user-k channel at
/// pilot p, zeroed when the user is inactive, so every column shares
/// one support set.
struct ChannelMatrix {
    MatrixXc h;       ///< J x P
    int num_users = 0;
    int antennas = 0;

    int rows_per_user() const { return antennas; }
    /// N_BS x K view of one pilot subcarrier (zero-copy reshape).
    Eigen::Map<const MatrixXc> subcarrier_slice(int p) const {
        return {h.col(p).data(), antennas, num_users};
    }
};

/// Assemble the aggregated channel from per-user channels (N_BS x P each)
/// and the activity pattern. Channels of inactive users may be empty.
inline ChannelMatrix build_channel_matrix(const std::vector<MatrixXc>& user_channels,
                                          const ActivityPattern& activity, int antennas,
                                          int pilot_subcarriers) {
    const int population = activity.population();
    if (static_cast<int>(user_channels.size()) != population)
        throw std::invalid_argument("build_channel_matrix: one channel per user required");
    ChannelMatrix cm;
    cm.num_users = population;
    cm.antennas = antennas;
    cm.h = MatrixXc::Zero(static_cast<Eigen::Index>(population) * antennas, pilot_subcarriers);
    for (int k = 0; k < population; ++k) {
        if (!activity.active[k]) continue;
        const MatrixXc& hk = user_channels[k];
        if (hk.rows() != antennas || hk.cols() != pilot_subcarriers)
            throw std::invalid_argument("build_channel_matrix: user channel dimension mismatch");
        cm.h.middleRows(static_cast<Eigen::Index>(k) * antennas, antennas) = hk;
    }
    return cm;
}

}  // namespace mpaud
