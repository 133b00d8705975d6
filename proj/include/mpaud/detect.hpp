#pragma once

#include <numeric>
#include <stdexcept>
#include <vector>

#include "mpaud/array.hpp"

namespace mpaud {

/// Thresholds of the two activity detectors. The channel-gain threshold
/// is relative: eps_cg = cg_rel_threshold * max |h_hat| over the slice,
/// so detection is invariant to a global rescaling of the estimate.
struct DetectorConfig {
    double cg_rel_threshold = 0.01;  ///< relative eps_cg
    double cg_fraction = 0.9;        ///< p_cg
    double bi_threshold = 0.5;       ///< eps_bi
    double bi_fraction = 0.5;        ///< p_bi (majority rule)
};

struct DetectionResult {
    std::vector<std::uint8_t> active;  ///< estimated alpha, length K
    std::vector<double> score;         ///< fraction of thresholded entries per user

    int num_active() const {
        int n = 0;
        for (auto a : active) n += a;
        return n;
    }
};

/// 1 iff |x| strictly exceeds eps.
inline int threshold_fn(Complex x, double eps) { return std::abs(x) > eps ? 1 : 0; }

/// Channel-gain activity detector on one subcarrier slice (N_BS x K):
/// user k is active when at least a p_cg fraction of its N_BS estimated
/// coefficients exceed eps_cg. An all-zero estimate yields eps_cg = 0 and
/// hence no detections.
template <typename Derived>
DetectionResult cg_ad(const Eigen::MatrixBase<Derived>& h_slice, const DetectorConfig& cfg = {}) {
    const Eigen::Index nbs = h_slice.rows();
    const Eigen::Index users = h_slice.cols();
    const double eps = cfg.cg_rel_threshold * h_slice.cwiseAbs().maxCoeff();
    DetectionResult out;
    out.active.resize(users);
    out.score.resize(users);
    for (Eigen::Index k = 0; k < users; ++k) {
        int hits = 0;
        for (Eigen::Index n = 0; n < nbs; ++n) hits += threshold_fn(h_slice(n, k), eps);
        out.score[k] = static_cast<double>(hits) / static_cast<double>(nbs);
        out.active[k] = out.score[k] >= cfg.cg_fraction ? 1 : 0;
    }
    return out;
}

/// Belief-indicator activity detector on one subcarrier slice of the
/// belief matrix (N_BS x K): user k is active when at least a p_bi
/// fraction of its beliefs exceed eps_bi.
template <typename Derived>
DetectionResult bi_ad(const Eigen::MatrixBase<Derived>& eta_slice, const DetectorConfig& cfg = {}) {
    const Eigen::Index nbs = eta_slice.rows();
    const Eigen::Index users = eta_slice.cols();
    DetectionResult out;
    out.active.resize(users);
    out.score.resize(users);
    for (Eigen::Index k = 0; k < users; ++k) {
        int hits = 0;
        for (Eigen::Index n = 0; n < nbs; ++n)
            hits += eta_slice(n, k) > cfg.bi_threshold ? 1 : 0;
        out.score[k] = static_cast<double>(hits) / static_cast<double>(nbs);
        out.active[k] = out.score[k] >= cfg.bi_fraction ? 1 : 0;
    }
    return out;
}

/// Activity-detection error probability: normalized Hamming distance,
/// counting both missed detections and false alarms.
inline double aud_error_prob(const std::vector<std::uint8_t>& estimated,
                             const std::vector<std::uint8_t>& truth) {
    if (estimated.size() != truth.size())
        throw std::invalid_argument("aud_error_prob: length mismatch");
    if (estimated.empty()) return 0.0;
    int errors = 0;
    for (std::size_t k = 0; k < truth.size(); ++k)
        errors += (estimated[k] != truth[k]) ? 1 : 0;
    return static_cast<double>(errors) / static_cast<double>(truth.size());
}

enum class NmseRows { ActiveOnly, All };
enum class NmseNorm { FullMatrix, PerSubcarrier };

/// Channel-estimation NMSE in dB. By default restricted to the rows of
/// truly active users (inactive rows are exactly zero in truth) and
/// normalized over the full matrix; per-subcarrier normalization averages
/// the per-column linear ratios instead. A perfect estimate is capped at
/// -300 dB rather than reported as -inf.
inline double nmse_db(const MatrixXc& h_hat, const MatrixXc& h_true,
                      const std::vector<std::uint8_t>& activity, int antennas,
                      NmseRows rows = NmseRows::ActiveOnly, NmseNorm norm = NmseNorm::FullMatrix) {
    if (h_hat.rows() != h_true.rows() || h_hat.cols() != h_true.cols())
        throw std::invalid_argument("nmse_db: shape mismatch");
    std::vector<Eigen::Index> row_idx;
    if (rows == NmseRows::ActiveOnly) {
        for (std::size_t k = 0; k < activity.size(); ++k)
            if (activity[k])
                for (int n = 0; n < antennas; ++n)
                    row_idx.push_back(static_cast<Eigen::Index>(k) * antennas + n);
    } else {
        row_idx.resize(h_true.rows());
        std::iota(row_idx.begin(), row_idx.end(), Eigen::Index{0});
    }

    constexpr double kFloorDb = -300.0;
    auto ratio_db = [&](double num, double den) {
        if (den <= 0.0) throw std::invalid_argument("nmse_db: zero reference channel");
        if (num <= den * 1e-30) return kFloorDb;
        return 10.0 * std::log10(num / den);
    };

    if (norm == NmseNorm::FullMatrix) {
        double num = 0.0, den = 0.0;
        for (Eigen::Index j : row_idx)
            for (Eigen::Index p = 0; p < h_true.cols(); ++p) {
                num += std::norm(h_hat(j, p) - h_true(j, p));
                den += std::norm(h_true(j, p));
            }
        return ratio_db(num, den);
    }
    double acc = 0.0;
    for (Eigen::Index p = 0; p < h_true.cols(); ++p) {
        double num = 0.0, den = 0.0;
        for (Eigen::Index j : row_idx) {
            num += std::norm(h_hat(j, p) - h_true(j, p));
            den += std::norm(h_true(j, p));
        }
        if (den <= 0.0) throw std::invalid_argument("nmse_db: zero reference subcarrier");
        acc += num / den;
    }
    const double mean_ratio = acc / static_cast<double>(h_true.cols());
    return mean_ratio <= 1e-30 ? kFloorDb : 10.0 * std::log10(mean_ratio);
}

}  // namespace mpaud
