#include <doctest.h>

#include <cmath>

#include "lft/lattice.hpp"
#include "lft/rng.hpp"

using namespace lft;

namespace {

FieldConfiguration random_field(const LatticeGeometry& g, uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    FieldConfiguration c = FieldConfiguration::zeros(g);
    for (double& v : c.values) v = scale * rng.gaussian();
    return c;
}

// independent oracle: central finite differences of the action itself
FieldConfiguration fd_gradient(const FieldConfiguration& cfg, const LatticeAction& action,
                               double h) {
    FieldConfiguration g = FieldConfiguration::zeros(cfg.geometry);
    FieldConfiguration probe = cfg;
    for (size_t k = 0; k < cfg.values.size(); ++k) {
        const double orig = probe.values[k];
        probe.values[k] = orig + h;
        const double up = action.value(probe);
        probe.values[k] = orig - h;
        const double dn = action.value(probe);
        probe.values[k] = orig;
        g.values[k] = (up - dn) / (2.0 * h);
    }
    return g;
}

} // namespace

TEST_CASE("phi4 action values") {
    const Phi4Params p{-4.0, 5.0};

    SUBCASE("zero field vanishes") {
        for (int L : {1, 2, 5}) {
            auto cfg = FieldConfiguration::zeros({{L, L}, 1.0});
            CHECK(phi4_action(cfg, p) == 0.0);
        }
    }
    SUBCASE("1x1 unit field") {
        FieldConfiguration cfg{{{1, 1}, 1.0}, {1.0}};
        CHECK(phi4_action(cfg, p) == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("2x2 checkerboard") {
        FieldConfiguration cfg{{{2, 2}, 1.0}, {1.0, -1.0, -1.0, 1.0}};
        CHECK(phi4_action(cfg, p) == doctest::Approx(36.0).epsilon(1e-14));
    }
    SUBCASE("non-finite input rejected") {
        FieldConfiguration cfg{{{1, 1}, 1.0}, {std::nan("")}};
        CHECK_THROWS_AS(phi4_action(cfg, p), InvalidInputError);
    }
}

TEST_CASE("graphene action values") {
    SUBCASE("zero field, cosine term only") {
        auto cfg = FieldConfiguration::zeros({{2, 2}, 1.0});
        CHECK(graphene_action(cfg, GrapheneParams{1.0, 0.1, +1}) ==
              doctest::Approx(-0.4).epsilon(1e-14));
    }
    SUBCASE("zero field and u = 0 vanishes") {
        auto cfg = FieldConfiguration::zeros({{3, 5}, 1.0});
        CHECK(graphene_action(cfg, GrapheneParams{2.0, 0.0, +1}) == 0.0);
    }
    SUBCASE("1x1 at phi = sqrt(pi)/2") {
        // direct substitution: gradients vanish, (g phi)^2/(2 pi) = 1/8,
        // -u cos(pi) = +1
        FieldConfiguration cfg{{{1, 1}, 1.0}, {std::sqrt(M_PI) / 2.0}};
        CHECK(graphene_action(cfg, GrapheneParams{1.0, 1.0, +1}) ==
              doctest::Approx(1.125).epsilon(1e-14));
    }
    SUBCASE("mass_sign flips the quadratic term") {
        FieldConfiguration cfg{{{1, 1}, 1.0}, {1.0}};
        const double plus = graphene_action(cfg, GrapheneParams{1.0, 0.0, +1});
        const double minus = graphene_action(cfg, GrapheneParams{1.0, 0.0, -1});
        CHECK(plus == doctest::Approx(-minus));
        CHECK(plus > 0.0);
    }
}

TEST_CASE("action gradients match finite differences") {
    SUBCASE("zero phi4 field is stationary") {
        auto cfg = FieldConfiguration::zeros({{3, 3}, 1.0});
        for (double v : phi4_gradient(cfg, Phi4Params{-4.0, 5.0}).values) CHECK(v == 0.0);
    }
    SUBCASE("zero graphene field is stationary") {
        auto cfg = FieldConfiguration::zeros({{3, 3}, 1.0});
        for (double v : graphene_gradient(cfg, GrapheneParams{1.0, 0.1, +1}).values)
            CHECK(v == 0.0);
    }
    SUBCASE("random 4x4 fields") {
        const LatticeGeometry g{{4, 4}, 1.0};
        for (uint64_t seed : {11u, 12u, 13u}) {
            const auto cfg = random_field(g, seed);
            for (const LatticeAction action :
                 {LatticeAction(Phi4Params{-4.0, 5.0}), LatticeAction(GrapheneParams{1.0, 0.1, +1})}) {
                const auto analytic = action.gradient(cfg);
                const auto fd = fd_gradient(cfg, action, 1e-5);
                for (size_t k = 0; k < analytic.values.size(); ++k) {
                    const double denom =
                        std::max({std::abs(analytic.values[k]), std::abs(fd.values[k]), 1.0});
                    CHECK(std::abs(analytic.values[k] - fd.values[k]) / denom < 1e-6);
                }
            }
        }
    }
}

TEST_CASE("checkerboard masks") {
    const LatticeGeometry g{{4, 6}, 1.0};

    SUBCASE("parity at t = 0 and t = 1") {
        const Mask m0 = checkerboard_mask(g, 0);
        const Mask m1 = checkerboard_mask(g, 1);
        CHECK(m0.bits[static_cast<size_t>(g.site(0, 0))] == 0);
        CHECK(m0.bits[static_cast<size_t>(g.site(0, 1))] == 1);
        CHECK(m1.bits[static_cast<size_t>(g.site(0, 0))] == 1);
        CHECK(m1.bits[static_cast<size_t>(g.site(0, 1))] == 0);
    }
    SUBCASE("mask(t) + mask(t+1) covers every site, period 2") {
        for (int t = 0; t < 5; ++t) {
            const Mask a = checkerboard_mask(g, t);
            const Mask b = checkerboard_mask(g, t + 1);
            const Mask c = checkerboard_mask(g, t + 2);
            for (size_t k = 0; k < a.bits.size(); ++k) {
                CHECK(a.bits[k] + b.bits[k] == 1);
                CHECK(a.bits[k] == c.bits[k]);
            }
        }
    }
}

TEST_CASE("split_by_mask and translate") {
    const LatticeGeometry g{{2, 2}, 1.0};

    SUBCASE("ones field split at t = 0") {
        FieldConfiguration ones{g, {1.0, 1.0, 1.0, 1.0}};
        auto [a, b] = split_by_mask(ones, checkerboard_mask(g, 0));
        CHECK(a.at(0, 1) == 1.0);
        CHECK(a.at(1, 0) == 1.0);
        CHECK(a.at(0, 0) == 0.0);
        CHECK(b.at(0, 0) == 1.0);
        CHECK(b.at(1, 1) == 1.0);
        CHECK(b.at(0, 1) == 0.0);
    }
    SUBCASE("x_a + x_b reconstructs x") {
        const auto x = random_field({{4, 4}, 1.0}, 5);
        for (int t : {0, 1}) {
            auto [a, b] = split_by_mask(x, checkerboard_mask(x.geometry, t));
            for (size_t k = 0; k < x.values.size(); ++k)
                CHECK(a.values[k] + b.values[k] == x.values[k]);
        }
    }
    SUBCASE("geometry mismatch rejected") {
        const auto x = random_field({{4, 4}, 1.0}, 5);
        CHECK_THROWS_AS(split_by_mask(x, checkerboard_mask({{2, 2}, 1.0}, 0)),
                        InvalidInputError);
    }
    SUBCASE("translation leaves both actions invariant") {
        const auto x = random_field({{4, 4}, 1.0}, 77);
        const LatticeAction phi4(Phi4Params{-4.0, 5.0});
        const LatticeAction gr(GrapheneParams{1.3, 0.2, +1});
        for (const auto& action : {phi4, gr}) {
            const double s0 = action.value(x);
            for (int d0 = 0; d0 < 4; ++d0)
                for (int d1 = 0; d1 < 4; ++d1) {
                    const double s = action.value(translate(x, {d0, d1}));
                    CHECK(std::abs(s - s0) < 1e-10 * (1.0 + std::abs(s0)));
                }
        }
    }
    SUBCASE("translate round trip") {
        const auto x = random_field({{3, 5}, 1.0}, 9);
        const auto y = translate(translate(x, {2, 3}), {-2, -3});
        for (size_t k = 0; k < x.values.size(); ++k) CHECK(y.values[k] == x.values[k]);
    }
}

TEST_CASE("Z2 symmetry of phi4") {
    const auto x = random_field({{4, 4}, 1.0}, 21);
    FieldConfiguration neg = x;
    for (double& v : neg.values) v = -v;
    const Phi4Params p{-4.0, 5.0};
    CHECK(phi4_action(x, p) == phi4_action(neg, p));
}

TEST_CASE("graphene action bounded below for mass_sign +1, u >= 0") {
    const GrapheneParams p{1.0, 0.3, +1};
    const LatticeGeometry g{{4, 4}, 1.0};
    for (uint64_t seed = 0; seed < 50; ++seed) {
        const auto x = random_field(g, 1000 + seed, 3.0);
        CHECK(graphene_action(x, p) >= -p.u * g.volume() - 1e-12);
    }
}
