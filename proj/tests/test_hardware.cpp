#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lft/hardware.hpp"
#include "lft/rng.hpp"

using namespace lft;

namespace {

MixerConfig small_config(int H, int W) {
    MixerConfig c;
    c.patch_size = 1;
    c.channels = 6;
    c.mixer_blocks = 1;
    c.token_hidden = 6;
    c.channel_hidden = 8;
    c.timesteps = 2;
    c.lora_rank = 2;
    c.height = H;
    c.width = W;
    return c;
}

} // namespace

TEST_CASE("conductance mapping") {
    const ConductanceMap map;

    SUBCASE("zero weight sits at the reference point") {
        const Tensor w = Tensor::zeros({4});
        const auto pair = map_weights(w, map);
        for (double v : pair.g_plus.data) CHECK(v == 50.0);
        for (double v : pair.g_minus.data) CHECK(v == 50.0);
        const Tensor back = reconstruct_weights(pair, map);
        for (double v : back.data) CHECK(v == 0.0);
    }
    SUBCASE("w_max maps to the top of the range") {
        const Tensor w({3}, {0.5, -0.25, 0.125});
        const auto pair = map_weights(w, map);
        CHECK(pair.g_plus.data[0] == doctest::Approx(80.0));
        CHECK(pair.g_minus.data[0] == doctest::Approx(50.0));
        CHECK(pair.g_minus.data[1] == doctest::Approx(65.0)); // half magnitude
        CHECK(pair.g_plus.data[1] == doctest::Approx(50.0));
    }
    SUBCASE("noiseless round trip is essentially exact") {
        Rng rng(5);
        Tensor w = Tensor::zeros({200});
        for (double& v : w.data) v = rng.gaussian();
        const Tensor back = reconstruct_weights(map_weights(w, map), map);
        for (size_t i = 0; i < w.data.size(); ++i) {
            const double denom = std::max(std::abs(w.data[i]), 1e-30);
            CHECK(std::abs(back.data[i] - w.data[i]) / denom < 1e-12);
        }
    }
}

TEST_CASE("programming noise") {
    const ConductanceMap map;

    SUBCASE("zero sigma is the identity") {
        const Tensor w({3}, {0.5, -0.25, 0.125});
        auto pair = map_weights(w, map);
        const auto plus = pair.g_plus.data;
        inject_noise(pair, NoiseModel{0.0, 9}, map);
        CHECK(pair.g_plus.data == plus);
    }
    SUBCASE("empirical spread matches sigma = 0.54 uS") {
        Tensor w = Tensor::full({100000}, 0.5);
        w.data[0] = 1.0; // sets w_max so the 0.5 cells sit mid-range (65 uS)
        auto pair = map_weights(w, map);
        const auto before = pair.g_plus.data;
        inject_noise(pair, NoiseModel{0.54, 10}, map);
        double var = 0.0;
        for (size_t i = 1; i < before.size(); ++i) {
            const double d = pair.g_plus.data[i] - before[i];
            var += d * d;
        }
        const double sd = std::sqrt(var / (before.size() - 1));
        CHECK(sd == doctest::Approx(0.54).epsilon(0.02));
    }
    SUBCASE("sigma = 1.79 uS puts ~95% within +-3.5 uS") {
        Tensor w = Tensor::full({100000}, 0.5);
        w.data[0] = 1.0;
        auto pair = map_weights(w, map);
        const auto before = pair.g_plus.data;
        inject_noise(pair, NoiseModel{1.79, 11}, map);
        int inside = 0;
        for (size_t i = 1; i < before.size(); ++i)
            if (std::abs(pair.g_plus.data[i] - before[i]) <= 3.5) ++inside;
        const double frac = static_cast<double>(inside) / (before.size() - 1);
        CHECK(frac == doctest::Approx(0.95).epsilon(0.01));
    }
    SUBCASE("fixed seed reproduces bit-exactly") {
        Tensor w = Tensor::full({64}, 0.3);
        auto a = map_weights(w, map);
        auto b = map_weights(w, map);
        inject_noise(a, NoiseModel{0.54, 12}, map);
        inject_noise(b, NoiseModel{0.54, 12}, map);
        CHECK(a.g_plus.data == b.g_plus.data);
        CHECK(a.g_minus.data == b.g_minus.data);
    }
    SUBCASE("values stay clamped to the programmable window") {
        Tensor w({2}, {1.0, -1.0});
        auto pair = map_weights(w, map);
        inject_noise(pair, NoiseModel{50.0, 13}, map);
        for (double v : pair.g_plus.data) {
            CHECK(v >= map.g_min_uS);
            CHECK(v <= map.g_max_uS);
        }
    }
}

TEST_CASE("energy report goldens") {
    const CostConstants c;

    SUBCASE("one 32x32 VMM") {
        LayerProfile lp{"vmm", 1024, 0, {{32, 32, 1}}};
        const auto rep = energy_report({lp}, c);
        CHECK(rep.hybrid_J * 1e12 == doctest::Approx(466.9).epsilon(5e-4)); // 4 significant figures
        CHECK(rep.digital_J * 1e12 == doctest::Approx(562.2).epsilon(5e-4));
    }
    SUBCASE("zero-MAC profile costs nothing") {
        LayerProfile lp{"idle", 0, 0, {}};
        const auto rep = energy_report({lp}, c);
        CHECK(rep.hybrid_J == 0.0);
        CHECK(rep.digital_J == 0.0);
    }
    SUBCASE("oversized VMM tiles onto 32x32 arrays") {
        // 64x64 = 4 tiles; each tile charges its own periphery
        LayerProfile lp{"big", 64 * 64, 0, {{64, 64, 1}}};
        const auto rep = energy_report({lp}, c);
        const double expect =
            4.0 * (1024 * 2.0e-15 + 32 * 0.227e-12 + 32 * (3e-12 + 11.3e-12));
        CHECK(rep.hybrid_J == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("latency report goldens") {
    const CostConstants c;

    SUBCASE("fully analog workload hits the throughput-ratio ceiling") {
        LayerProfile lp{"analog", 123456, 0, {{32, 32, 121}}};
        const auto rep = latency_report({lp}, c);
        CHECK(rep.speedup == doctest::Approx(5.72 / 0.14).epsilon(1e-12));
    }
    SUBCASE("fully digital workload has unit speedup") {
        LayerProfile lp{"digital", 0, 5000, {}};
        const auto rep = latency_report({lp}, c);
        CHECK(rep.speedup == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("1024-MAC analog layer takes ~0.358 ns") {
        LayerProfile lp{"vmm", 1024, 0, {{32, 32, 1}}};
        const auto rep = latency_report({lp}, c);
        CHECK(rep.hybrid_s * 1e9 == doctest::Approx(0.358).epsilon(1e-3));
    }
    SUBCASE("speedup never exceeds the ceiling") {
        Rng rng(17);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<LayerProfile> profiles;
            for (int l = 0; l < 5; ++l) {
                LayerProfile lp;
                lp.name = "l" + std::to_string(l);
                lp.analog_macs = static_cast<int64_t>(rng.uniform() * 1e6);
                lp.digital_macs = static_cast<int64_t>(rng.uniform() * 1e5);
                profiles.push_back(lp);
            }
            const auto rep = latency_report(profiles, c);
            CHECK(rep.speedup <= 5.72 / 0.14 + 1e-9);
            CHECK(rep.speedup >= 1.0 - 1e-9);
        }
    }
}

TEST_CASE("scaling sweep") {
    const CostConstants c;
    MixerConfig family; // desk defaults; height/width replaced per size

    SUBCASE("speedup and analog share grow with the lattice") {
        const auto rows = scaling_sweep({4, 6, 12, 24}, family, c);
        REQUIRE(rows.size() == 4);
        for (size_t i = 1; i < rows.size(); ++i) {
            CHECK(rows[i].speedup > rows[i - 1].speedup);
            CHECK(rows[i].analog_mac_fraction > rows[i - 1].analog_mac_fraction);
        }
        CHECK(rows.back().analog_mac_fraction > 0.9);
    }
    SUBCASE("degenerate single-size sweep yields one row") {
        const auto rows = scaling_sweep({4}, family, c);
        CHECK(rows.size() == 1);
    }
}

TEST_CASE("degraded inference and recovery") {
    const LatticeAction action(Phi4Params{-4.0, 5.0});
    auto w = init_flow_weights(small_config(2, 2), 21);
    Rng rng(22);
    for (double& v : w.px_w.data) v = 0.1 * rng.gaussian();
    for (double& v : w.px_b.data) v = 0.1 * rng.gaussian();

    SUBCASE("zero noise and disabled converters reproduce the clean ESS") {
        ConductanceMap map;
        map.dac_bits = 0; // disables quantization
        map.adc_bits = 0;
        auto deg = degraded_inference(w, map, NoiseModel{0.0, 23}, action, 256, 24);
        CHECK(std::abs(deg.ess_degraded - deg.ess_clean) < 1e-9);
    }
    SUBCASE("digital tensors are never touched") {
        auto deg = degraded_inference(w, ConductanceMap{}, NoiseModel{0.54, 25}, action, 128, 26);
        auto r0 = w.tensors();
        auto r1 = deg.weights.tensors();
        bool analog_changed = false;
        for (size_t i = 0; i < r0.size(); ++i) {
            if (r0[i].partition == Partition::digital)
                CHECK(r0[i].tensor->data == r1[i].tensor->data);
            else if (r0[i].tensor->data != r1[i].tensor->data)
                analog_changed = true;
        }
        CHECK(analog_changed);
    }
    SUBCASE("degraded ESS does not beat clean ESS in the median over 20 seeds") {
        // noise hurts around an optimum, so train a real flow first
        MixerConfig wc = small_config(2, 2);
        wc.channels = 8;
        wc.token_hidden = 8;
        wc.channel_hidden = 16;
        wc.timesteps = 4;
        auto w0 = init_flow_weights(wc, 21);
        TrainHyper h;
        h.steps = 800;
        h.batch_size = 64;
        h.learning_rate = 3e-3;
        h.eval_every = 200;
        h.eval_batch = 1024;
        h.seed = 270;
        auto [trained, rep] = train(w0, action, h);
        REQUIRE(rep.final_ess > 0.2);
        std::vector<double> deltas;
        for (uint64_t s = 0; s < 20; ++s) {
            auto deg = degraded_inference(trained, ConductanceMap{}, NoiseModel{1.0, 100 + s},
                                          action, 512, 27);
            deltas.push_back(deg.ess_degraded - deg.ess_clean);
        }
        std::sort(deltas.begin(), deltas.end());
        CHECK(deltas[deltas.size() / 2] <= 1e-9);
    }
    SUBCASE("recovery trains only digital tensors and reports ESS") {
        auto deg = degraded_inference(w, ConductanceMap{}, NoiseModel{0.54, 28}, action, 256, 29);
        TrainHyper h;
        h.steps = 20;
        h.batch_size = 16;
        h.eval_every = 20;
        h.eval_batch = 128;
        auto [recovered, rep] = lora_recovery(deg, action, h);
        auto r0 = deg.weights.tensors();
        auto r1 = recovered.tensors();
        for (size_t i = 0; i < r0.size(); ++i)
            if (r0[i].partition == Partition::analog)
                CHECK(r0[i].tensor->data == r1[i].tensor->data);
        CHECK(rep.ess_recovered > 0.0);
        CHECK(rep.ess_clean == deg.ess_clean);
    }
    SUBCASE("zero-noise recovery barely moves the ESS") {
        ConductanceMap map;
        map.dac_bits = 0;
        map.adc_bits = 0;
        auto deg = degraded_inference(w, map, NoiseModel{0.0, 30}, action, 256, 31);
        TrainHyper h;
        h.steps = 10;
        h.batch_size = 16;
        h.learning_rate = 1e-4;
        h.eval_every = 10;
        h.eval_batch = 256;
        auto [recovered, rep] = lora_recovery(deg, action, h);
        CHECK(std::abs(rep.ess_recovered - rep.ess_clean) < 0.02);
    }
}

TEST_CASE("hardware json report") {
    const auto profiles = layer_profiles(small_config(4, 4));
    const std::string doc = hardware_report_json(profiles, CostConstants{});
    CHECK(doc.find("\"schema_version\": 1") != std::string::npos);
    CHECK(doc.find("\"totals\"") != std::string::npos);
    CHECK(doc.find("\"speedup\"") != std::string::npos);
    CHECK(doc.find("coupling_update") != std::string::npos);
}
