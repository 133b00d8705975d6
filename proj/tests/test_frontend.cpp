#include <catch2/catch_amalgamated.hpp>

#include <cstdio>

#include "mpaud/io.hpp"
#include "mpaud/sensing.hpp"

using namespace mpaud;

namespace {

// All four DFT columns for K = 4, written out by hand.
const Complex kDft4[4][4] = {
    {{1, 0}, {1, 0}, {1, 0}, {1, 0}},
    {{1, 0}, {0, -1}, {-1, 0}, {0, 1}},
    {{1, 0}, {-1, 0}, {1, 0}, {-1, 0}},
    {{1, 0}, {0, 1}, {-1, 0}, {0, -1}},
};

SensingOperator small_operator(const ArrayGeometry& geom, int users, int symbols,
                               std::uint64_t seed) {
    Rng rng(seed);
    const PilotBook book = gen_pilots(users, symbols, rng);
    std::vector<Combiner> combs;
    for (int g = 0; g < symbols; ++g) combs.push_back(build_combiner(geom, rng));
    return assemble_sensing(book, combs, geom);
}

MatrixXc random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    MatrixXc m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.cnormal();
    return m;
}

}  // namespace

TEST_CASE("pilot book", "[frontend]") {
    SECTION("columns match the hand-written DFT table") {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            Rng rng(seed);
            const PilotBook book = gen_pilots(4, 2, rng);
            for (int g = 0; g < 2; ++g) {
                const auto idx = book.dft_columns[g];
                for (int m = 0; m < 4; ++m)
                    REQUIRE(std::abs(book.s(m, g) - kDft4[idx][m]) < 1e-12);
            }
        }
    }

    SECTION("distinct columns are orthogonal") {
        Rng rng(9);
        const PilotBook book = gen_pilots(16, 8, rng);
        for (int a = 0; a < 8; ++a)
            for (int b = a + 1; b < 8; ++b)
                REQUIRE(std::abs((book.s.col(a).adjoint() * book.s.col(b))(0, 0)) < 1e-10);
    }

    SECTION("deterministic under the seed") {
        Rng a(4), b(4);
        const PilotBook ba = gen_pilots(12, 5, a), bb = gen_pilots(12, 5, b);
        REQUIRE(ba.dft_columns == bb.dft_columns);
        REQUIRE((ba.s - bb.s).cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("more symbols than population rejected") {
        Rng rng(1);
        REQUIRE_THROWS_AS(gen_pilots(4, 5, rng), std::invalid_argument);
    }
}

TEST_CASE("combiner", "[frontend]") {
    const ArrayGeometry geom{2, 2, 2, 2, 4};
    Rng rng(11);

    SECTION("columns are orthonormal") {
        for (int trial = 0; trial < 10; ++trial) {
            const Combiner c = build_combiner(geom, rng);
            const MatrixXc w = c.dense(geom);
            const MatrixXc gram = w.adjoint() * w;
            REQUIRE((gram - MatrixXc::Identity(geom.num_panels(), geom.num_panels()))
                        .cwiseAbs()
                        .maxCoeff() < 1e-10);
        }
    }

    SECTION("each column has exactly M_BS nonzeros of modulus 1/sqrt(M_BS)") {
        const Combiner c = build_combiner(geom, rng);
        const MatrixXc w = c.dense(geom);
        const double want = 1.0 / std::sqrt(static_cast<double>(geom.panel_antennas()));
        for (int np = 0; np < geom.num_panels(); ++np) {
            int nonzeros = 0;
            for (int n = 0; n < geom.total_antennas(); ++n) {
                if (std::abs(w(n, np)) == 0.0) continue;
                ++nonzeros;
                REQUIRE(std::abs(std::abs(w(n, np)) - want) < 1e-12);
                REQUIRE(geom.panel_of(n) == np);
            }
            REQUIRE(nonzeros == geom.panel_antennas());
        }
    }

    SECTION("combining keeps the noise white") {
        const Combiner c = build_combiner(geom, rng);
        const MatrixXc w = c.dense(geom);
        const double sigma2 = 0.7;
        const int draws = 10000;
        MatrixXc cov = MatrixXc::Zero(geom.num_panels(), geom.num_panels());
        Rng noise_rng(123);
        for (int d = 0; d < draws; ++d) {
            VectorXc n(geom.total_antennas());
            for (Eigen::Index i = 0; i < n.size(); ++i) n(i) = noise_rng.cnormal(sigma2);
            const VectorXc combined = w.adjoint() * n;
            cov += combined * combined.adjoint();
        }
        cov /= static_cast<double>(draws);
        const MatrixXc target = sigma2 * MatrixXc::Identity(geom.num_panels(), geom.num_panels());
        REQUIRE((cov - target).cwiseAbs().maxCoeff() < 0.05 * sigma2);
    }
}

TEST_CASE("sensing operator", "[frontend]") {
    SECTION("rows are orthonormal (K=8, G=3, N_BS=8, N_P=4)") {
        const ArrayGeometry geom{2, 2, 2, 1, 3};
        REQUIRE(geom.total_antennas() == 8);
        REQUIRE(geom.num_panels() == 4);
        const SensingOperator op = small_operator(geom, 8, 3, 21);
        const MatrixXc f = op.dense();
        REQUIRE(f.rows() == 12);
        REQUIRE(f.cols() == 64);
        const MatrixXc gram = f * f.adjoint();
        REQUIRE((gram - MatrixXc::Identity(op.rows(), op.rows())).cwiseAbs().maxCoeff() < 1e-10);
    }

    SECTION("row blocks of different symbols stay orthogonal") {
        const ArrayGeometry geom{2, 1, 2, 2, 5};
        const SensingOperator op = small_operator(geom, 10, 4, 3);
        const MatrixXc f = op.dense();
        const int npanels = geom.num_panels();
        for (int g1 = 0; g1 < 4; ++g1)
            for (int g2 = g1 + 1; g2 < 4; ++g2) {
                const MatrixXc cross = f.middleRows(g1 * npanels, npanels) *
                                       f.middleRows(g2 * npanels, npanels).adjoint();
                REQUIRE(cross.cwiseAbs().maxCoeff() < 1e-10);
            }
    }

    SECTION("structured products match the dense operator") {
        const ArrayGeometry geom{2, 2, 1, 2, 2};
        const SensingOperator op = small_operator(geom, 6, 4, 7);
        const MatrixXc f = op.dense();
        Rng rng(31);
        const MatrixXc x = random_matrix(op.cols(), 3, rng);
        REQUIRE((op.apply(x) - f * x).cwiseAbs().maxCoeff() < 1e-10);
        const MatrixXc y = random_matrix(op.rows(), 3, rng);
        REQUIRE((op.apply_adjoint(y) - f.adjoint() * y).cwiseAbs().maxCoeff() < 1e-10);
    }

    SECTION("apply and adjoint are exact adjoints") {
        const ArrayGeometry geom{2, 2, 2, 2, 6};
        const SensingOperator op = small_operator(geom, 12, 5, 13);
        Rng rng(77);
        for (int trial = 0; trial < 20; ++trial) {
            const MatrixXc x = random_matrix(op.cols(), 1, rng);
            const MatrixXc y = random_matrix(op.rows(), 1, rng);
            const Complex lhs = (op.apply(x).adjoint() * y)(0, 0);
            const Complex rhs = (x.adjoint() * op.apply_adjoint(y))(0, 0);
            REQUIRE(std::abs(lhs - rhs) < 1e-10);
        }
    }

    SECTION("smallest case: K=1, G=1, one panel over the whole array") {
        const ArrayGeometry geom{1, 1, 2, 2, 2};
        Rng rng(2);
        const PilotBook book = gen_pilots(1, 1, rng);
        const Combiner comb = build_combiner(geom, rng);
        const SensingOperator op = assemble_sensing(book, {comb}, geom);
        REQUIRE(op.rows() == 1);
        REQUIRE(op.cols() == 4);
        const MatrixXc f = op.dense();
        // One orthonormal row: the conjugated masked DFT column / sqrt(M_BS).
        REQUIRE(std::abs((f * f.adjoint())(0, 0) - Complex{1, 0}) < 1e-12);
        for (int n = 0; n < 4; ++n) REQUIRE(std::abs(f(0, n) - std::conj(comb.flat(n))) < 1e-14);
    }

    SECTION("single column extraction matches the dense operator") {
        const ArrayGeometry geom{2, 1, 2, 3, 4};
        const SensingOperator op = small_operator(geom, 5, 3, 17);
        const MatrixXc f = op.dense();
        for (Eigen::Index j = 0; j < op.cols(); j += 7)
            REQUIRE((op.column(j) - f.col(j)).cwiseAbs().maxCoeff() < 1e-13);
    }

    SECTION("dimension mismatches rejected") {
        const ArrayGeometry geom{2, 1, 1, 1, 2};
        const SensingOperator op = small_operator(geom, 4, 2, 1);
        REQUIRE_THROWS_AS(op.apply(MatrixXc::Zero(op.cols() + 1, 1)), std::invalid_argument);
        REQUIRE_THROWS_AS(op.apply_adjoint(MatrixXc::Zero(op.rows() + 1, 1)),
                          std::invalid_argument);
        Rng rng(1);
        const PilotBook book = gen_pilots(4, 2, rng);
        REQUIRE_THROWS_AS(assemble_sensing(book, {}, geom), std::invalid_argument);
    }
}

TEST_CASE("received measurements", "[frontend]") {
    const ArrayGeometry geom{2, 2, 2, 2, 6};
    const int users = 24;
    const SensingOperator op = small_operator(geom, users, 6, 5);
    const OfdmConfig ofdm{1e9, 256, 8, 30e9, 32};
    Rng rng(8);

    auto make_channel = [&](int num_active) {
        auto pat = draw_activity(users, num_active, rng);
        std::vector<MatrixXc> chans(users);
        for (int k = 0; k < users; ++k)
            if (pat.active[k])
                chans[k] = synth_user_channel(draw_paths(4, 32e-9, rng), geom, ofdm);
        return build_channel_matrix(chans, pat, geom.total_antennas(), ofdm.pilot_subcarriers);
    };

    SECTION("noiseless flag returns the exact product") {
        const auto cm = make_channel(4);
        Rng nrng(3);
        const auto meas =
            simulate_received(op, cm, std::numeric_limits<double>::infinity(), nrng);
        REQUIRE(meas.noise_var == 0.0);
        REQUIRE((meas.y - op.apply(cm.h)).cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("zero channel and noiseless gives zero measurements") {
        const auto cm = make_channel(0);
        Rng nrng(3);
        const auto meas =
            simulate_received(op, cm, std::numeric_limits<double>::infinity(), nrng);
        REQUIRE(meas.y.cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("zero channel with finite SNR is an error") {
        const auto cm = make_channel(0);
        Rng nrng(3);
        REQUIRE_THROWS_AS(simulate_received(op, cm, 20.0, nrng), std::invalid_argument);
    }

    SECTION("empirical SNR lands within 0.2 dB") {
        // Q * P = 96 per instance; average the ratio over many noise draws
        // of one signal realization to pass the 10^4-sample bar.
        const auto cm = make_channel(6);
        const double snr_db = 12.0;
        double signal_power = 0.0, noise_power = 0.0;
        const MatrixXc clean = op.apply(cm.h);
        Rng nrng(19);
        for (int d = 0; d < 200; ++d) {
            const auto meas = simulate_received(op, cm, snr_db, nrng);
            signal_power += clean.squaredNorm();
            noise_power += (meas.y - clean).squaredNorm();
        }
        const double snr_est = 10.0 * std::log10(signal_power / noise_power);
        REQUIRE(std::abs(snr_est - snr_db) < 0.2);
    }
}

TEST_CASE("binary matrix dump", "[frontend]") {
    SECTION("round trip") {
        Rng rng(4);
        const MatrixXc m = random_matrix(5, 3, rng);
        const std::string path = "test_dump_roundtrip.bin";
        write_complex_matrix(path, m);
        const MatrixXc back = read_complex_matrix(path);
        REQUIRE(back.rows() == 5);
        REQUIRE(back.cols() == 3);
        REQUIRE((m - back).cwiseAbs().maxCoeff() == 0.0);
        std::remove(path.c_str());
    }

    SECTION("byte layout is frozen") {
        MatrixXc m(2, 1);
        m << Complex{1.0, -2.0}, Complex{0.5, 3.0};
        const std::string path = "test_dump_layout.bin";
        write_complex_matrix(path, m);
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        REQUIRE(bytes.size() == 16 + 2 * 16);
        const auto* dims = reinterpret_cast<const std::uint64_t*>(bytes.data());
        REQUIRE(dims[0] == 2);
        REQUIRE(dims[1] == 1);
        const auto* payload = reinterpret_cast<const double*>(bytes.data() + 16);
        REQUIRE(payload[0] == 1.0);   // re(0,0)
        REQUIRE(payload[1] == -2.0);  // im(0,0)
        REQUIRE(payload[2] == 0.5);   // re(1,0), column-major
        REQUIRE(payload[3] == 3.0);
        std::remove(path.c_str());
    }
}
