#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>

namespace mpaud {

using Complex = std::complex<double>;
using VectorXc = Eigen::VectorXcd;
using MatrixXc = Eigen::MatrixXcd;

/// Multi-panel rectangular array: an I_h x I_v grid of uniform planar
/// panels, each panel M_h x M_v antennas at half-wavelength spacing d.
/// Adjacent panels are separated by D*d, so the first element of the
/// next panel sits (M + D - 1) element positions after the first element
/// of the previous one along the same axis.
struct ArrayGeometry {
    int panels_h = 1;        ///< I_h
    int panels_v = 1;        ///< I_v
    int panel_ant_h = 1;     ///< M_h
    int panel_ant_v = 1;     ///< M_v
    int panel_gap = 2;       ///< D, panel spacing in units of d

    int ant_h() const { return panels_h * panel_ant_h; }          ///< N_h
    int ant_v() const { return panels_v * panel_ant_v; }          ///< N_v
    int total_antennas() const { return ant_h() * ant_v(); }      ///< N_BS
    int panel_antennas() const { return panel_ant_h * panel_ant_v; }  ///< M_BS
    int num_panels() const { return panels_h * panels_v; }        ///< N_P

    /// D >= 2 is the physical multi-panel regime; D = 1 degenerates to a
    /// gap-free UPA and is allowed for cross-checks against the plain
    /// ULA/UPA steering model.
    void validate() const {
        if (panels_h < 1 || panels_v < 1 || panel_ant_h < 1 || panel_ant_v < 1)
            throw std::invalid_argument("ArrayGeometry: all counts must be >= 1");
        if (panel_gap < 1)
            throw std::invalid_argument("ArrayGeometry: panel gap multiple must be >= 1");
    }

    /// Element position along the horizontal axis in units of d.
    /// n_h = panel index * M_h + element index within the panel.
    double pos_h(int n_h) const {
        const int panel = n_h / panel_ant_h;
        const int elem = n_h % panel_ant_h;
        return panel * (panel_ant_h + panel_gap - 1) + elem;
    }

    /// Element position along the vertical axis in units of d.
    double pos_v(int n_v) const {
        const int panel = n_v / panel_ant_v;
        const int elem = n_v % panel_ant_v;
        return panel * (panel_ant_v + panel_gap - 1) + elem;
    }

    /// Antenna index convention: flattened as n = n_v * N_h + n_h, i.e.
    /// the vertical index is the slow axis. This matches the Kronecker
    /// order a_v (x) a_h used throughout and is frozen so that combiner
    /// panel index sets line up with channel vectors.
    int antenna_index(int n_h, int n_v) const { return n_v * ant_h() + n_h; }

    /// Panel that antenna n belongs to; panels are numbered i_v * I_h + i_h.
    int panel_of(int antenna) const {
        const int n_h = antenna % ant_h();
        const int n_v = antenna / ant_h();
        return (n_v / panel_ant_v) * panels_h + (n_h / panel_ant_h);
    }

    /// The ordered antenna index set of one panel (cardinality M_BS).
    std::vector<int> panel_antenna_indices(int panel) const {
        const int i_h = panel % panels_h;
        const int i_v = panel / panels_h;
        std::vector<int> idx;
        idx.reserve(panel_antennas());
        for (int m_v = 0; m_v < panel_ant_v; ++m_v)
            for (int m_h = 0; m_h < panel_ant_h; ++m_h)
                idx.push_back(antenna_index(i_h * panel_ant_h + m_h, i_v * panel_ant_v + m_v));
        return idx;
    }
};

enum class SteeringKind { HPanel, HElement, VPanel, VElement };

/// One factor of the separable multi-panel steering vector: a geometric
/// phase progression with stride 1 (within a panel) or M + D - 1 (across
/// panels). First entry is always 1 and every entry has unit modulus.
inline VectorXc steering_factor(SteeringKind kind, double angle, const ArrayGeometry& geom) {
    if (!std::isfinite(angle)) throw std::invalid_argument("steering_factor: angle must be finite");
    int len = 0;
    double stride = 0.0;
    switch (kind) {
        case SteeringKind::HPanel:
            len = geom.panels_h;
            stride = geom.panel_ant_h + geom.panel_gap - 1;
            break;
        case SteeringKind::HElement:
            len = geom.panel_ant_h;
            stride = 1.0;
            break;
        case SteeringKind::VPanel:
            len = geom.panels_v;
            stride = geom.panel_ant_v + geom.panel_gap - 1;
            break;
        case SteeringKind::VElement:
            len = geom.panel_ant_v;
            stride = 1.0;
            break;
        default:
            throw std::invalid_argument("steering_factor: invalid kind");
    }
    VectorXc v(len);
    for (int i = 0; i < len; ++i) v(i) = std::polar(1.0, stride * angle * i);
    return v;
}

/// Horizontal steering vector a_h = a_h^panel (x) a_h^element, length N_h.
inline VectorXc steering_h(double mu, const ArrayGeometry& geom) {
    const VectorXc panel = steering_factor(SteeringKind::HPanel, mu, geom);
    const VectorXc elem = steering_factor(SteeringKind::HElement, mu, geom);
    VectorXc out(geom.ant_h());
    for (int i = 0; i < panel.size(); ++i)
        out.segment(i * elem.size(), elem.size()) = panel(i) * elem;
    return out;
}

/// Vertical steering vector a_v, length N_v.
inline VectorXc steering_v(double nu, const ArrayGeometry& geom) {
    const VectorXc panel = steering_factor(SteeringKind::VPanel, nu, geom);
    const VectorXc elem = steering_factor(SteeringKind::VElement, nu, geom);
    VectorXc out(geom.ant_v());
    for (int i = 0; i < panel.size(); ++i)
        out.segment(i * elem.size(), elem.size()) = panel(i) * elem;
    return out;
}

/// Full multi-panel array response a = a_v (x) a_h, length N_BS,
/// equal to vec of the rank-one matrix a_h * a_v^T.
inline VectorXc multi_panel_response(double mu, double nu, const ArrayGeometry& geom) {
    geom.validate();
    const VectorXc ah = steering_h(mu, geom);
    const VectorXc av = steering_v(nu, geom);
    VectorXc out(geom.total_antennas());
    for (int nv = 0; nv < av.size(); ++nv)
        out.segment(nv * ah.size(), ah.size()) = av(nv) * ah;
    return out;
}

}  // namespace mpaud
