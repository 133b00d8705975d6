#pragma once

#include <vector>

#include "mpaud/array.hpp"
#include "mpaud/rng.hpp"

namespace mpaud {

/// Partially-connected analog combiner of one OFDM symbol. Column n_p
/// feeds RF chain n_p and is supported exactly on the antennas of panel
/// n_p, where it carries entries of a randomly chosen 2-D DFT column
/// scaled by 1/sqrt(M_BS). The digital combiner is the identity.
///
/// Because each antenna belongs to exactly one panel, the whole matrix
/// is captured by one value per antenna (`flat`), with column support
/// given by the geometry's panel map.
struct Combiner {
    VectorXc flat;                      ///< length N_BS, flat(n) = W(n, panel_of(n))
    std::vector<std::size_t> dft_columns;  ///< chosen 2-D DFT column per panel

    /// Dense N_BS x N_P matrix (small instances / verification).
    MatrixXc dense(const ArrayGeometry& geom) const {
        const int nbs = geom.total_antennas();
        MatrixXc w = MatrixXc::Zero(nbs, geom.num_panels());
        for (int n = 0; n < nbs; ++n) w(n, geom.panel_of(n)) = flat(n);
        return w;
    }
};

/// Entry (row, col) of the N_BS-point 2-D DFT D_{N_v} (x) D_{N_h},
/// with rows flattened as n = n_v * N_h + n_h.
inline Complex dft2_entry(int row, int col, int n_h_total, int n_v_total) {
    const int rv = row / n_h_total, rh = row % n_h_total;
    const int cv = col / n_h_total, ch = col % n_h_total;
    const double phase = -2.0 * M_PI * (static_cast<double>(rv) * cv / n_v_total +
                                        static_cast<double>(rh) * ch / n_h_total);
    return std::polar(1.0, phase);
}

/// Build the combiner of one symbol: pick N_P distinct columns of the
/// 2-D DFT at random (a fresh permutation per symbol), mask column n_p
/// to panel n_p's antennas and scale by 1/sqrt(M_BS). The result has
/// orthonormal columns, so the combined noise stays white.
inline Combiner build_combiner(const ArrayGeometry& geom, Rng& rng) {
    geom.validate();
    const int nbs = geom.total_antennas();
    const double scale = 1.0 / std::sqrt(static_cast<double>(geom.panel_antennas()));
    Combiner c;
    c.dft_columns = rng.sample_without_replacement(nbs, geom.num_panels());
    c.flat.resize(nbs);
    for (int n = 0; n < nbs; ++n) {
        const int panel = geom.panel_of(n);
        c.flat(n) = scale * dft2_entry(n, static_cast<int>(c.dft_columns[panel]), geom.ant_h(),
                                       geom.ant_v());
    }
    return c;
}

}  // namespace mpaud
