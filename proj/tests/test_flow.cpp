#include <doctest.h>

#include <cmath>

#include "lft/flow.hpp"
#include "lft/rng.hpp"

using namespace lft;

namespace {

MixerConfig tiny_config(int H, int W, int P = 1) {
    MixerConfig c;
    c.patch_size = P;
    c.channels = 6;
    c.mixer_blocks = 1;
    c.token_hidden = 5;
    c.channel_hidden = 7;
    c.timesteps = 4;
    c.lora_rank = 1;
    c.height = H;
    c.width = W;
    return c;
}

// give the regression head nonzero weights so the flow is not the identity
void randomize_head(FlowWeights& w, uint64_t seed, double scale = 0.3, bool lora = false) {
    Rng rng(seed);
    for (double& v : w.px_w.data) v = scale * rng.gaussian();
    for (double& v : w.px_b.data) v = scale * rng.gaussian();
    if (lora)
        for (auto& blk : w.blocks)
            for (double& v : blk.l1.b.data) v = 0.1 * rng.gaussian();
}

Tensor apply_flow(const Tensor& x, FlowWeights& w) {
    Tensor cur = x;
    for (int t = 0; t < w.config.timesteps; ++t) cur = coupling_inverse(cur, t, w).first;
    return cur;
}

// test-only oracle: determinant by Gaussian elimination with partial pivoting
double det_dense(std::vector<std::vector<double>> m) {
    const size_t n = m.size();
    double det = 1.0;
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < n; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        if (m[piv][col] == 0.0) return 0.0;
        if (piv != col) {
            std::swap(m[piv], m[col]);
            det = -det;
        }
        det *= m[col][col];
        for (size_t r = col + 1; r < n; ++r) {
            const double f = m[r][col] / m[col][col];
            for (size_t c = col; c < n; ++c) m[r][c] -= f * m[col][c];
        }
    }
    return det;
}

} // namespace

TEST_CASE("mixer config validation") {
    CHECK_THROWS_AS([] { auto c = tiny_config(4, 4, 3); c.validate(); }(), ConfigError);
    CHECK_THROWS_AS([] { auto c = tiny_config(4, 4, 2); c.timesteps = 5; c.validate(); }(),
                    ConfigError);
    CHECK_THROWS_AS([] { auto c = tiny_config(4, 4, 2); c.lora_rank = 0; c.validate(); }(),
                    ConfigError);
    CHECK_THROWS_AS([] { auto c = tiny_config(4, 4, 2); c.lora_rank = 99; c.validate(); }(),
                    ConfigError);
    // rank equal to the smallest adapted dimension is allowed (1x1 lattice)
    auto c = tiny_config(1, 1, 1);
    c.validate();
    CHECK(c.patches() == 1);
}

TEST_CASE("conditioner output is masked and deterministic") {
    auto w = init_flow_weights(tiny_config(4, 4, 2), 7);
    randomize_head(w, 8);
    FieldConfiguration x = FieldConfiguration::zeros(w.config.geometry());
    Rng rng(9);
    for (double& v : x.values) v = rng.gaussian();

    for (int t = 0; t < w.config.timesteps; ++t) {
        const Mask m = checkerboard_mask(x.geometry, t);
        auto [xa, xb] = split_by_mask(x, m);
        const auto out1 = mixer_forward(xa, t, w, Mode::inference);
        const auto out2 = mixer_forward(xa, t, w, Mode::inference);
        for (size_t k = 0; k < out1.s1.data.size(); ++k) {
            if (m.bits[k]) { // frozen sites carry exactly zero
                CHECK(out1.s1.data[k] == 0.0);
                CHECK(out1.s2.data[k] == 0.0);
            }
            CHECK(out1.s1.data[k] == out2.s1.data[k]); // bit-identical reruns
            CHECK(out1.s2.data[k] == out2.s2.data[k]);
        }
    }
    CHECK_THROWS_AS(mixer_forward(x, w.config.timesteps, w, Mode::inference), InvalidInputError);
}

TEST_CASE("zero LoRA B leaves the base network untouched") {
    auto base = init_flow_weights(tiny_config(4, 4, 2), 11);
    auto adapted = base;
    Rng rng(12);
    for (auto& blk : adapted.blocks) { // scramble every A; B stays zero
        for (double& v : blk.l1.a.data) v = rng.gaussian();
        for (double& v : blk.l2.a.data) v = rng.gaussian();
        for (double& v : blk.l3.a.data) v = rng.gaussian();
        for (double& v : blk.l4.a.data) v = rng.gaussian();
    }
    randomize_head(base, 13);
    randomize_head(adapted, 13);

    FieldConfiguration xa = FieldConfiguration::zeros(base.config.geometry());
    Rng rng2(14);
    for (double& v : xa.values) v = rng2.gaussian();
    xa = split_by_mask(xa, checkerboard_mask(xa.geometry, 0)).first;

    const auto o1 = mixer_forward(xa, 0, base, Mode::inference);
    const auto o2 = mixer_forward(xa, 0, adapted, Mode::inference);
    CHECK(o1.s1.data == o2.s1.data);
    CHECK(o1.s2.data == o2.s2.data);
}

TEST_CASE("coupling layer algebra") {
    SUBCASE("identity at initialization (zero regression head)") {
        auto w = init_flow_weights(tiny_config(4, 4, 2), 21);
        Tensor x = Tensor::zeros({4, 4});
        Rng rng(22);
        for (double& v : x.data) v = rng.gaussian();
        auto [y, logdet] = coupling_inverse(x, 0, w);
        CHECK(y.data == x.data);
        CHECK(logdet == 0.0);
    }
    SUBCASE("constant-conditioner substitution") {
        // head bias makes the conditioner constant: s1 = 1, s2 = ln 2 on
        // active sites; active entries become (x - 1)/2, logdet = 2 ln 2
        auto w = init_flow_weights(tiny_config(2, 2, 1), 23);
        w.px_b = Tensor({2}, {1.0, std::log(2.0)});
        const Tensor x({2, 2}, {1.0, 2.0, 3.0, 4.0});
        auto [y, logdet] = coupling_inverse(x, 0, w);
        // t = 0 mask freezes odd parity; active sites are (0,0) and (1,1)
        CHECK(y.data[0] == doctest::Approx((1.0 - 1.0) / 2.0));
        CHECK(y.data[3] == doctest::Approx((4.0 - 1.0) / 2.0));
        CHECK(y.data[1] == 2.0);
        CHECK(y.data[2] == 3.0);
        CHECK(logdet == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
    }
    SUBCASE("round trip within 1e-10") {
        auto w = init_flow_weights(tiny_config(4, 4, 2), 24);
        randomize_head(w, 25, 0.3, /*lora=*/true);
        Tensor x = Tensor::zeros({4, 4});
        Rng rng(26);
        for (double& v : x.data) v = rng.gaussian();
        for (int t = 0; t < w.config.timesteps; ++t) {
            auto [mid, ld_inv] = coupling_inverse(x, t, w);
            auto [back, ld_fwd] = coupling_forward(mid, t, w);
            for (size_t k = 0; k < x.data.size(); ++k)
                CHECK(std::abs(back.data[k] - x.data[k]) < 1e-10);
            CHECK(ld_inv == doctest::Approx(ld_fwd).epsilon(1e-12));
            // frozen sites identical in both directions
            const Mask m = checkerboard_mask(w.config.geometry(), t);
            for (size_t k = 0; k < x.data.size(); ++k)
                if (m.bits[k]) {
                    CHECK(mid.data[k] == x.data[k]);
                    CHECK(back.data[k] == mid.data[k]);
                }
        }
    }
    SUBCASE("numeric range guard") {
        auto w = init_flow_weights(tiny_config(2, 2, 1), 27);
        w.px_b = Tensor({2}, {0.0, 800.0});
        const Tensor x({2, 2}, {1.0, 2.0, 3.0, 4.0});
        CHECK_THROWS_AS(coupling_inverse(x, 0, w), NumericRangeError);
    }
}

TEST_CASE("flow_sample on the identity flow") {
    auto w = init_flow_weights(tiny_config(4, 4, 2), 31);

    SUBCASE("phi = x and log_q = log_r exactly") {
        const auto recs = flow_sample(w, 8, 99);
        for (const auto& r : recs) {
            CHECK(r.config.values == r.prior.data);
            CHECK(r.log_q == r.log_r);
            for (double ld : r.layer_logdets) CHECK(ld == 0.0);
            CHECK(r.layer_logdets.size() == static_cast<size_t>(w.config.timesteps));
        }
    }
    SUBCASE("chunk size does not change the stream") {
        const auto a = flow_sample(w, 7, 123, nullptr, 2);
        const auto b = flow_sample(w, 7, 123, nullptr, 64);
        for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].config.values == b[i].config.values);
    }
    SUBCASE("standard-normal site moments") {
        const int n = 20000;
        const auto recs = flow_sample(w, n, 321);
        double phi2 = 0.0;
        for (const auto& r : recs)
            for (double v : r.config.values) phi2 += v * v;
        phi2 /= n * 16.0;
        CHECK(phi2 == doctest::Approx(1.0).epsilon(0.035)); // ~3 sigma at this n
    }
}

TEST_CASE("exact-density identity against a numerical Jacobian") {
    // log q must equal log r(x) - log|det(dphi/dx)| for any weights
    for (uint64_t seed : {41u, 42u, 43u}) {
        auto w = init_flow_weights(tiny_config(2, 2, 1), seed);
        randomize_head(w, seed + 100, 0.1, /*lora=*/true);

        Tensor x = Tensor::zeros({2, 2});
        Rng rng(seed + 200);
        for (double& v : x.data) v = rng.gaussian();

        double log_q = 0.0;
        {
            double ss = 0.0;
            for (double v : x.data) ss += v * v;
            log_q = -0.5 * ss - 2.0 * std::log(2.0 * M_PI); // log r, V = 4
            Tensor cur = x;
            for (int t = 0; t < w.config.timesteps; ++t) {
                auto [next, ld] = coupling_inverse(cur, t, w);
                cur = next;
                log_q += ld;
            }
        }

        const double h = 1e-6;
        std::vector<std::vector<double>> jac(4, std::vector<double>(4, 0.0));
        for (size_t j = 0; j < 4; ++j) {
            Tensor up = x, dn = x;
            up.data[j] += h;
            dn.data[j] -= h;
            const Tensor fu = apply_flow(up, w);
            const Tensor fd = apply_flow(dn, w);
            for (size_t i = 0; i < 4; ++i) jac[i][j] = (fu.data[i] - fd.data[i]) / (2.0 * h);
        }
        double ss = 0.0;
        for (double v : x.data) ss += v * v;
        const double log_r = -0.5 * ss - 2.0 * std::log(2.0 * M_PI);
        const double expected = log_r - std::log(std::abs(det_dense(jac)));
        CHECK(std::abs(log_q - expected) / std::max(1.0, std::abs(expected)) < 1e-6);
    }
}

TEST_CASE("mask alternation covers every site T/2 times") {
    const MixerConfig c = tiny_config(4, 6, 2);
    std::vector<int> active(24, 0);
    for (int t = 0; t < c.timesteps; ++t) {
        const Mask m = checkerboard_mask(c.geometry(), t);
        for (size_t k = 0; k < m.bits.size(); ++k)
            if (!m.bits[k]) ++active[k];
    }
    for (int a : active) CHECK(a == c.timesteps / 2);
}

TEST_CASE("weight sharing across timesteps") {
    auto w = init_flow_weights(tiny_config(4, 4, 2), 51);
    randomize_head(w, 52);
    FieldConfiguration xa = FieldConfiguration::zeros(w.config.geometry());
    Rng rng(53);
    for (double& v : xa.values) v = rng.gaussian();

    auto outputs = [&](FlowWeights& weights) {
        std::vector<ConditionerOutput> outs;
        for (int t = 0; t < weights.config.timesteps; ++t) {
            const auto masked = split_by_mask(xa, checkerboard_mask(xa.geometry, t)).first;
            outs.push_back(mixer_forward(masked, t, weights, Mode::inference));
        }
        return outs;
    };
    const auto base = outputs(w);

    SUBCASE("perturbing e_t0 changes only timestep t0") {
        auto w2 = w;
        const int t0 = 1;
        for (int j = 0; j < w2.config.channels; ++j)
            w2.time_embed.data[static_cast<size_t>(t0) * w2.config.channels + j] += 0.5;
        const auto pert = outputs(w2);
        for (int t = 0; t < w.config.timesteps; ++t) {
            if (t == t0) continue;
            CHECK(pert[static_cast<size_t>(t)].s1.data == base[static_cast<size_t>(t)].s1.data);
            CHECK(pert[static_cast<size_t>(t)].s2.data == base[static_cast<size_t>(t)].s2.data);
        }
        CHECK(pert[t0].s2.data != base[t0].s2.data);
    }
    SUBCASE("perturbing a shared base tensor changes every timestep") {
        auto w2 = w;
        for (double& v : w2.blocks[0].w3.data) v += 0.25;
        const auto pert = outputs(w2);
        for (int t = 0; t < w.config.timesteps; ++t)
            CHECK(pert[static_cast<size_t>(t)].s2.data != base[static_cast<size_t>(t)].s2.data);
    }
}

TEST_CASE("parameter and MAC accounting") {
    SUBCASE("token-mix base path formula") {
        MixerConfig c;
        c.patch_size = 2;
        c.height = 4;
        c.width = 4; // s = 4
        c.channels = 8;
        c.token_hidden = 16;
        c.channel_hidden = 8;
        c.mixer_blocks = 1;
        c.timesteps = 2;
        c.lora_rank = 1;
        const auto profiles = layer_profiles(c);
        bool found = false;
        for (const auto& lp : profiles)
            if (lp.name == "block0.token.mlp") {
                found = true;
                // base path per timestep: C * 2 * s * D_s = 8*2*4*16 = 1024
                CHECK(lp.analog_macs == c.timesteps * 1024);
            }
        CHECK(found);
    }
    SUBCASE("single fully-connected layer counts in*out MACs per row") {
        MixerConfig c = tiny_config(4, 4, 2);
        const auto profiles = layer_profiles(c);
        for (const auto& lp : profiles)
            if (lp.name == "patch_embed") {
                const int64_t per_row = static_cast<int64_t>(c.patch_size) * c.patch_size * c.channels;
                CHECK(lp.analog_macs == static_cast<int64_t>(c.timesteps) * c.patches() * per_row);
            }
    }
    SUBCASE("default desk config stays under the 8% digital budget") {
        MixerConfig c; // defaults on the 4x4 lattice
        const MacCounts mc = count_params_and_macs(c);
        CHECK(mc.digital_param_fraction() < 0.08);
        CHECK(mc.analog_mac_fraction() > 0.5);
    }
    SUBCASE("totals equal the sum over layers") {
        const MixerConfig c = tiny_config(4, 4, 2);
        const auto profiles = layer_profiles(c);
        const MacCounts mc = count_params_and_macs(c);
        int64_t a = 0, d = 0;
        for (const auto& lp : profiles) {
            a += lp.analog_macs;
            d += lp.digital_macs;
        }
        CHECK(a == mc.analog_macs);
        CHECK(d == mc.digital_macs);
    }
}
