#include <catch2/catch_amalgamated.hpp>

#include "mpaud/array.hpp"
#include "mpaud/rng.hpp"

using namespace mpaud;

namespace {

// Independent oracle: element positions found by walking the axis
// (unit steps inside a panel, a D-step across the panel boundary),
// phases accumulated per element.
std::vector<double> axis_positions(int panels, int per_panel, int gap) {
    std::vector<double> pos;
    double x = 0.0;
    for (int i = 0; i < panels; ++i) {
        for (int m = 0; m < per_panel; ++m) {
            pos.push_back(x);
            x += 1.0;
        }
        x += gap - 1.0;  // the inter-panel step is D*d instead of d
    }
    return pos;
}

VectorXc oracle_response(double mu, double nu, const ArrayGeometry& g) {
    const auto ph = axis_positions(g.panels_h, g.panel_ant_h, g.panel_gap);
    const auto pv = axis_positions(g.panels_v, g.panel_ant_v, g.panel_gap);
    VectorXc out(g.total_antennas());
    for (int nv = 0; nv < g.ant_v(); ++nv)
        for (int nh = 0; nh < g.ant_h(); ++nh)
            out(static_cast<Eigen::Index>(nv) * g.ant_h() + nh) =
                std::polar(1.0, ph[nh] * mu + pv[nv] * nu);
    return out;
}

}  // namespace

TEST_CASE("steering factor basics", "[array]") {
    ArrayGeometry geom{2, 3, 2, 2, 2};

    SECTION("zero angle gives all ones") {
        const VectorXc v = steering_factor(SteeringKind::HElement, 0.0, geom);
        REQUIRE(v.size() == 2);
        for (Eigen::Index i = 0; i < v.size(); ++i) REQUIRE(std::abs(v(i) - Complex{1, 0}) < 1e-15);
    }

    SECTION("panel factor stride is M_h + D - 1") {
        const double mu = 0.7;
        const VectorXc v = steering_factor(SteeringKind::HPanel, mu, geom);
        REQUIRE(v.size() == 2);
        REQUIRE(std::abs(v(0) - Complex{1, 0}) < 1e-15);
        REQUIRE(std::abs(v(1) - std::polar(1.0, 3.0 * mu)) < 1e-14);
    }

    SECTION("all entries unit modulus, first entry one") {
        Rng rng(3);
        for (int i = 0; i < 50; ++i) {
            const double ang = rng.uniform(-M_PI, M_PI);
            for (auto kind : {SteeringKind::HPanel, SteeringKind::HElement, SteeringKind::VPanel,
                              SteeringKind::VElement}) {
                const VectorXc v = steering_factor(kind, ang, geom);
                REQUIRE(std::abs(v(0) - Complex{1, 0}) < 1e-15);
                for (Eigen::Index n = 0; n < v.size(); ++n)
                    REQUIRE(std::abs(std::abs(v(n)) - 1.0) < 1e-12);
            }
        }
    }

    SECTION("non-finite angle rejected") {
        REQUIRE_THROWS_AS(
            steering_factor(SteeringKind::HElement, std::numeric_limits<double>::quiet_NaN(), geom),
            std::invalid_argument);
    }
}

TEST_CASE("multi-panel response", "[array]") {
    SECTION("zero angles give the all-ones vector") {
        ArrayGeometry geom{3, 2, 2, 2, 4};
        const VectorXc a = multi_panel_response(0.0, 0.0, geom);
        REQUIRE(a.size() == geom.total_antennas());
        for (Eigen::Index n = 0; n < a.size(); ++n) REQUIRE(std::abs(a(n) - Complex{1, 0}) < 1e-14);
    }

    SECTION("horizontal positions with a gap: {0, 1, 7, 8}") {
        ArrayGeometry geom{2, 1, 2, 1, 6};
        const double mu = 0.31;
        const VectorXc a = multi_panel_response(mu, 0.0, geom);
        const double expected_pos[] = {0.0, 1.0, 7.0, 8.0};
        REQUIRE(a.size() == 4);
        for (int n = 0; n < 4; ++n)
            REQUIRE(std::abs(a(n) - std::polar(1.0, expected_pos[n] * mu)) < 1e-13);
    }

    SECTION("matches the position-walk oracle on random geometries") {
        Rng rng(17);
        for (int trial = 0; trial < 100; ++trial) {
            ArrayGeometry geom;
            geom.panels_h = 1 + static_cast<int>(rng.below(3));
            geom.panels_v = 1 + static_cast<int>(rng.below(3));
            geom.panel_ant_h = 1 + static_cast<int>(rng.below(3));
            geom.panel_ant_v = 1 + static_cast<int>(rng.below(3));
            geom.panel_gap = 2 + static_cast<int>(rng.below(5));
            const double mu = rng.uniform(-M_PI, M_PI);
            const double nu = rng.uniform(-M_PI, M_PI);
            const VectorXc got = multi_panel_response(mu, nu, geom);
            const VectorXc want = oracle_response(mu, nu, geom);
            REQUIRE((got - want).cwiseAbs().maxCoeff() < 1e-10);
        }
    }

    SECTION("D = 1 degenerates to the gap-free UPA") {
        ArrayGeometry geom{2, 2, 3, 2, 1};
        Rng rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            const double mu = rng.uniform(-M_PI, M_PI);
            const double nu = rng.uniform(-M_PI, M_PI);
            const VectorXc got = multi_panel_response(mu, nu, geom);
            // Standard UPA: phase n_h * mu + n_v * nu with no gaps.
            for (int nv = 0; nv < geom.ant_v(); ++nv)
                for (int nh = 0; nh < geom.ant_h(); ++nh) {
                    const Complex want = std::polar(1.0, nh * mu + nv * nu);
                    REQUIRE(std::abs(got(nv * geom.ant_h() + nh) - want) < 1e-12);
                }
        }
    }

    SECTION("geometry validation") {
        ArrayGeometry bad{0, 1, 1, 1, 2};
        REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
        ArrayGeometry bad_gap{1, 1, 1, 1, 0};
        REQUIRE_THROWS_AS(bad_gap.validate(), std::invalid_argument);
    }
}

TEST_CASE("panel index sets partition the array", "[array]") {
    ArrayGeometry geom{2, 2, 2, 3, 5};
    std::vector<int> seen(geom.total_antennas(), 0);
    for (int p = 0; p < geom.num_panels(); ++p) {
        const auto idx = geom.panel_antenna_indices(p);
        REQUIRE(static_cast<int>(idx.size()) == geom.panel_antennas());
        for (int n : idx) {
            REQUIRE(geom.panel_of(n) == p);
            seen[n] += 1;
        }
    }
    for (int c : seen) REQUIRE(c == 1);
}
