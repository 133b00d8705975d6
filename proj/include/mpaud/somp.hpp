#pragma once

#include <vector>

#include "mpaud/sensing.hpp"

namespace mpaud {

/// Simultaneous OMP over the shared support of all P measurement vectors.
/// Block-aware mode selects whole user blocks of `block_size` rows per
/// step, matching the structured sparsity of the channel; plain mode
/// selects single columns by the sum of absolute correlations.
struct GreedyConfig {
    int max_support = 0;        ///< max selected columns of F (<= Q)
    double residual_tol = 1e-6; ///< stop when ||R||_F / ||Y||_F drops below
    bool block_aware = true;
    int block_size = 1;         ///< rows per user block (N_BS)
    double ridge = 1e-10;       ///< regularizer for rank-deficient refits
};

struct SompResult {
    MatrixXc h_hat;                      ///< J x P (zero outside the support)
    std::vector<Eigen::Index> support;   ///< selected column indices, ascending
    std::vector<int> blocks;             ///< selected user blocks (block mode)
    std::vector<double> residual_norms;  ///< ||R||_F after each refit
    bool ridge_used = false;
};

inline SompResult somp(const MatrixXc& y, const SensingOperator& f, const GreedyConfig& cfg) {
    const Eigen::Index J = f.cols();
    const Eigen::Index P = y.cols();
    if (cfg.max_support > f.rows())
        throw std::invalid_argument("somp: max support exceeds measurement count");
    if (cfg.block_aware && (cfg.block_size < 1 || J % cfg.block_size != 0))
        throw std::invalid_argument("somp: block size must divide J");

    SompResult res;
    res.h_hat = MatrixXc::Zero(J, P);
    const double y_norm = y.norm();
    if (y_norm <= 0.0 || cfg.max_support <= 0) return res;

    MatrixXc residual = y;
    std::vector<Eigen::Index> support;
    std::vector<char> block_used(cfg.block_aware ? J / cfg.block_size : J, 0);
    MatrixXc f_sub;   // Q x |support|, rebuilt as the support grows
    MatrixXc coef;

    while (static_cast<Eigen::Index>(support.size()) < cfg.max_support) {
        if (residual.norm() <= cfg.residual_tol * y_norm) break;
        const MatrixXc corr = f.apply_adjoint(residual);  // J x P

        std::vector<Eigen::Index> picked;
        if (cfg.block_aware) {
            const Eigen::Index nblocks = J / cfg.block_size;
            int best = -1;
            double best_score = -1.0;
            for (Eigen::Index b = 0; b < nblocks; ++b) {
                if (block_used[b]) continue;
                const double score =
                    corr.middleRows(b * cfg.block_size, cfg.block_size).squaredNorm();
                if (score > best_score) {
                    best_score = score;
                    best = static_cast<int>(b);
                }
            }
            if (best < 0) break;
            if (static_cast<Eigen::Index>(support.size()) + cfg.block_size > cfg.max_support)
                break;
            block_used[best] = 1;
            res.blocks.push_back(best);
            for (int i = 0; i < cfg.block_size; ++i)
                picked.push_back(static_cast<Eigen::Index>(best) * cfg.block_size + i);
        } else {
            Eigen::Index best = -1;
            double best_score = -1.0;
            for (Eigen::Index j = 0; j < J; ++j) {
                if (block_used[j]) continue;
                const double score = corr.row(j).cwiseAbs().sum();
                if (score > best_score) {
                    best_score = score;
                    best = j;
                }
            }
            if (best < 0) break;
            block_used[best] = 1;
            picked.push_back(best);
        }
        for (Eigen::Index j : picked) support.push_back(j);

        // Joint least-squares refit of all P vectors on the support.
        f_sub.resize(f.rows(), support.size());
        for (std::size_t i = 0; i < support.size(); ++i) f_sub.col(i) = f.column(support[i]);
        Eigen::ColPivHouseholderQR<MatrixXc> qr(f_sub);
        if (qr.rank() < f_sub.cols()) {
            res.ridge_used = true;
            const MatrixXc gram = f_sub.adjoint() * f_sub +
                                  cfg.ridge * MatrixXc::Identity(f_sub.cols(), f_sub.cols());
            coef = gram.ldlt().solve(f_sub.adjoint() * y);
        } else {
            coef = qr.solve(y);
        }
        residual = y - f_sub * coef;
        res.residual_norms.push_back(residual.norm());
    }

    // coef rows follow the insertion order of the support columns.
    for (std::size_t i = 0; i < support.size(); ++i)
        res.h_hat.row(support[i]) = coef.row(static_cast<Eigen::Index>(i));
    res.support = support;
    std::sort(res.support.begin(), res.support.end());
    std::sort(res.blocks.begin(), res.blocks.end());
    return res;
}

}  // namespace mpaud
