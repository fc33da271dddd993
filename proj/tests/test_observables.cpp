#include <doctest.h>

#include <cmath>

#include "lft/observables.hpp"
#include "lft/rng.hpp"

using namespace lft;

namespace {

Ensemble iid_site_ensemble(const LatticeGeometry& g, int n, uint64_t seed, double sigma = 1.0) {
    Rng rng(seed);
    Ensemble ens;
    ens.geometry = g;
    ens.sampler = "test";
    for (int i = 0; i < n; ++i) {
        auto c = FieldConfiguration::zeros(g);
        for (double& v : c.values) v = sigma * rng.gaussian();
        ens.configs.push_back(std::move(c));
        ens.entries.push_back(EnsembleEntry{0.0, 0.0, false, true, i});
    }
    return ens;
}

Ensemble constant_ensemble(const LatticeGeometry& g, int n, double value) {
    Ensemble ens;
    ens.geometry = g;
    ens.sampler = "test";
    for (int i = 0; i < n; ++i) {
        ens.configs.push_back(
            FieldConfiguration{g, std::vector<double>(static_cast<size_t>(g.volume()), value)});
        ens.entries.push_back(EnsembleEntry{0.0, 0.0, false, true, i});
    }
    return ens;
}

Series ar1_series(int n, double rho, uint64_t seed) {
    Rng rng(seed);
    Series s(static_cast<size_t>(n));
    double x = 0.0;
    const double noise = std::sqrt(1.0 - rho * rho);
    for (int i = 0; i < n; ++i) {
        x = rho * x + noise * rng.gaussian();
        s[static_cast<size_t>(i)] = x;
    }
    return s;
}

} // namespace

TEST_CASE("magnetization") {
    const LatticeGeometry g{{4, 4}, 1.0};

    SUBCASE("all-ones configs have unit magnetization") {
        const auto ens = constant_ensemble(g, 5, 1.0);
        const auto m = magnetization(ens);
        for (double v : m.per_config) CHECK(v == 1.0);
        CHECK(m.mean == 1.0);
        CHECK(m.mean_abs == 1.0);
    }
    SUBCASE("sign flip negates M but not |M|") {
        auto ens = iid_site_ensemble(g, 50, 3);
        const auto m0 = magnetization(ens);
        for (auto& c : ens.configs)
            for (double& v : c.values) v = -v;
        const auto m1 = magnetization(ens);
        CHECK(m1.mean == doctest::Approx(-m0.mean).epsilon(1e-14));
        CHECK(m1.mean_abs == doctest::Approx(m0.mean_abs).epsilon(1e-14));
    }
    SUBCASE("iid sites concentrate around zero at the CLT rate") {
        const int n = 20000;
        const auto ens = iid_site_ensemble(g, n, 4);
        const auto m = magnetization(ens);
        CHECK(std::abs(m.mean) < 3.0 / std::sqrt(16.0 * n));
    }
}

TEST_CASE("autocorrelation") {
    SUBCASE("iid series decorrelates immediately") {
        Rng rng(7);
        Series s(100000);
        for (double& v : s) v = rng.gaussian();
        const auto c = autocorrelation(s, 10);
        CHECK(c[0] == doctest::Approx(1.0).epsilon(0.02));
        for (int t = 1; t <= 10; ++t) CHECK(std::abs(c[static_cast<size_t>(t)]) < 0.02);
    }
    SUBCASE("constant series is degenerate") {
        const Series s(100, 3.25);
        CHECK_THROWS_AS(autocorrelation(s, 5), DegenerateSeriesError);
    }
    SUBCASE("AR(1) autocovariance decays geometrically") {
        const double rho = 0.5;
        const auto s = ar1_series(200000, rho, 8);
        const auto c = autocorrelation(s, 6);
        for (int t = 1; t <= 6; ++t)
            CHECK(c[static_cast<size_t>(t)] / c[0] ==
                  doctest::Approx(std::pow(rho, t)).epsilon(0.12));
    }
    SUBCASE("series shorter than the window is rejected") {
        const Series s{1.0, 2.0};
        CHECK_THROWS_AS(autocorrelation(s, 2), InvalidInputError);
    }
}

TEST_CASE("tau_int") {
    SUBCASE("iid series gives 1/2") {
        Rng rng(9);
        Series s(100000);
        for (double& v : s) v = rng.gaussian();
        CHECK(tau_int(s) == doctest::Approx(0.5).epsilon(0.1)); // +-0.05
    }
    SUBCASE("AR(1) with rho = 0.8 gives 0.5 + rho/(1-rho)") {
        const auto s = ar1_series(400000, 0.8, 10);
        CHECK(tau_int(s) == doctest::Approx(4.5).epsilon(0.10));
    }
}

TEST_CASE("connected correlators") {
    const LatticeGeometry g{{4, 4}, 1.0};

    SUBCASE("identical configurations have zero connected part") {
        const auto ens = constant_ensemble(g, 12, 0.7);
        const auto table = connected_two_point(ens);
        for (double v : table.values) CHECK(std::abs(v) < 1e-12);
        CHECK(std::abs(susceptibility(ens)) < 1e-12);
    }
    SUBCASE("iid sites: unit on-site value, zero elsewhere") {
        const auto ens = iid_site_ensemble(g, 40000, 12);
        const auto table = connected_two_point(ens);
        CHECK(table.at(0, 0) == doctest::Approx(1.0).epsilon(0.03));
        CHECK(std::abs(table.at(1, 0)) < 0.02);
        CHECK(std::abs(table.at(0, 1)) < 0.02);
        CHECK(std::abs(ising_energy(ens)) < 0.02);
    }
    SUBCASE("reflection symmetry of the averaged estimator") {
        const auto ens = iid_site_ensemble(g, 200, 13);
        const auto table = connected_two_point(ens);
        for (int d0 = 0; d0 < 4; ++d0)
            for (int d1 = 0; d1 < 4; ++d1)
                CHECK(table.at(d0, d1) ==
                      doctest::Approx(table.at((4 - d0) % 4, (4 - d1) % 4)).epsilon(1e-12));
    }
    SUBCASE("needs at least two configurations") {
        const auto ens = constant_ensemble(g, 1, 1.0);
        CHECK_THROWS_AS(connected_two_point(ens), InsufficientDataError);
    }
    SUBCASE("observables are translation invariant") {
        auto ens = iid_site_ensemble(g, 300, 14);
        const double chi0 = susceptibility(ens);
        const double e0 = ising_energy(ens);
        for (auto& c : ens.configs) c = translate(c, {1, 3});
        CHECK(susceptibility(ens) == doctest::Approx(chi0).epsilon(1e-10));
        CHECK(ising_energy(ens) == doctest::Approx(e0).epsilon(1e-10));
    }
}

TEST_CASE("correlation length") {
    SUBCASE("pure exponential is recovered exactly") {
        const double xi = 2.5;
        std::vector<double> corr(8);
        for (size_t x = 0; x < corr.size(); ++x) corr[x] = std::exp(-static_cast<double>(x) / xi);
        const auto r = correlation_length_from(corr);
        CHECK(r.inv_xi == doctest::Approx(1.0 / xi).epsilon(1e-12));
        CHECK(r.skipped_terms == 0);
        CHECK(r.used_terms == 6);
    }
    SUBCASE("amplitude does not matter") {
        std::vector<double> corr(8);
        for (size_t x = 0; x < corr.size(); ++x)
            corr[x] = 3.0 * std::exp(-0.4 * static_cast<double>(x));
        CHECK(correlation_length_from(corr).inv_xi == doctest::Approx(0.4).epsilon(1e-12));
    }
    SUBCASE("every term out of domain raises") {
        CHECK_THROWS_AS(correlation_length_from({1.0, 10.0, 1.0}), UndefinedLengthError);
    }
}

TEST_CASE("mass gap fit") {
    SUBCASE("exact exponential within 1e-10") {
        std::vector<double> corr(12);
        for (size_t t = 0; t < corr.size(); ++t) corr[t] = std::exp(-0.5 * static_cast<double>(t));
        const auto fit = mass_gap_fit(corr, 1, 8);
        CHECK(std::abs(fit.m_gap - 0.5) < 1e-10);
        CHECK(fit.std_error < 1e-10);
    }
    SUBCASE("amplitude is absorbed by the intercept") {
        std::vector<double> corr(12);
        for (size_t t = 0; t < corr.size(); ++t)
            corr[t] = 3.0 * std::exp(-0.25 * static_cast<double>(t));
        CHECK(std::abs(mass_gap_fit(corr, 1, 8).m_gap - 0.25) < 1e-10);
    }
    SUBCASE("nonpositive correlator raises") {
        CHECK_THROWS_AS(mass_gap_fit({1.0, -0.1, -0.2, -0.3, -0.4, -0.5}, 1, 5), FitDomainError);
    }
    SUBCASE("default window keeps at least three slices on a 6-site lattice") {
        std::vector<double> corr(6);
        for (size_t t = 0; t < corr.size(); ++t) corr[t] = std::exp(-0.3 * static_cast<double>(t));
        const auto fit = mass_gap_fit(corr);
        CHECK(fit.points_used >= 3);
        CHECK(std::abs(fit.m_gap - 0.3) < 1e-10);
    }
}

TEST_CASE("chiral condensate") {
    const LatticeGeometry g{{4, 4}, 1.0};

    SUBCASE("all-zero ensemble hits the closed-form constant") {
        const auto ens = constant_ensemble(g, 10, 0.0);
        // -(e^gamma / (2 pi^{3/2})) * 10
        CHECK(chiral_condensate(ens, 1.0) == doctest::Approx(-1.5992883492).epsilon(1e-9));
    }
    SUBCASE("vanishing mean cosine gives zero") {
        // half the sites at cos = +1, half at cos = -1
        Ensemble ens;
        ens.geometry = g;
        const double half_period = std::sqrt(M_PI) / 2.0; // 2 sqrt(pi) phi = pi
        for (int i = 0; i < 4; ++i) {
            auto c = FieldConfiguration::zeros(g);
            for (int k = 0; k < 16; ++k)
                c.values[static_cast<size_t>(k)] = (k % 2) ? half_period : 0.0;
            ens.configs.push_back(std::move(c));
            ens.entries.push_back(EnsembleEntry{});
        }
        CHECK(std::abs(chiral_condensate(ens, 1.0)) < 1e-12);
    }
    SUBCASE("independent of the coupling g") {
        const auto ens = constant_ensemble(g, 10, 0.3);
        CHECK(chiral_condensate(ens, 0.5) == chiral_condensate(ens, 2.0));
    }
}

TEST_CASE("bootstrap") {
    SUBCASE("constant data has zero spread") {
        const Series s(64, 2.5);
        const auto [mean, err] = bootstrap_mean_error(s, 200, 1);
        CHECK(mean == doctest::Approx(2.5).epsilon(1e-14));
        CHECK(err == 0.0);
    }
    SUBCASE("iid normal: error of the mean is ~ 1/sqrt(n)") {
        const int n = 10000;
        Rng rng(2);
        Series s(static_cast<size_t>(n));
        for (double& v : s) v = rng.gaussian();
        const auto [mean, err] = bootstrap_mean_error(s, 1000, 3);
        CHECK(err == doctest::Approx(1.0 / std::sqrt(n)).epsilon(0.10));
    }
    SUBCASE("error shrinks like sqrt(2) when the sample doubles") {
        Rng rng(4);
        Series s(8000);
        for (double& v : s) v = rng.gaussian();
        const Series half(s.begin(), s.begin() + 4000);
        const auto [m1, e1] = bootstrap_mean_error(half, 800, 5);
        const auto [m2, e2] = bootstrap_mean_error(s, 800, 6);
        CHECK(e1 / e2 == doctest::Approx(std::sqrt(2.0)).epsilon(0.12));
    }
    SUBCASE("too few samples raise") {
        CHECK_THROWS_AS(bootstrap_mean_error(Series(5, 1.0), 100, 7), InsufficientDataError);
    }
    SUBCASE("generic estimator over indices") {
        const auto [mean, err] = bootstrap_error(
            100, [](const std::vector<int>& idx) { return static_cast<double>(idx.size()); }, 50,
            8);
        CHECK(mean == 100.0);
        CHECK(err == 0.0);
    }
}
