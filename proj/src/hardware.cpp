#include "lft/hardware.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "lft/rng.hpp"

namespace lft {

void ConductanceMap::validate() const {
    if (!(g_min_uS < g_ref_uS && g_ref_uS < g_max_uS))
        throw ConfigError("conductance map: need g_min < g_ref < g_max");
    if (v_min != -v_max) throw ConfigError("conductance map: voltage range must be symmetric");
    // bits <= 0 disables a converter (ideal resolution); otherwise >= 2
    if (dac_bits == 1 || adc_bits == 1)
        throw ConfigError("conductance map: converter bits must be 0 (ideal) or >= 2");
}

void CostConstants::validate() const {
    const double all[] = {e_digital_mac_J, e_cell_J,         e_dac_J,
                          e_tia_J,         e_adc_J,          analog_tflops_mm2,
                          digital_tflops_mm2, area_mm2,      static_cast<double>(flops_per_mac),
                          static_cast<double>(array_size)};
    for (double v : all)
        if (!(v > 0.0)) throw ConfigError("cost constants must all be positive");
}

ConductancePair map_weights(const Tensor& w, const ConductanceMap& map) {
    map.validate();
    if (!w.all_finite()) throw InvalidInputError("map_weights: non-finite weight");
    ConductancePair pair{Tensor::full(w.shape, map.g_ref_uS), Tensor::full(w.shape, map.g_ref_uS),
                         0.0};
    for (double v : w.data) pair.w_max = std::max(pair.w_max, std::abs(v));
    if (pair.w_max == 0.0) return pair; // all-zero tensor maps to the reference point
    const double span = map.g_max_uS - map.g_ref_uS;
    for (size_t i = 0; i < w.data.size(); ++i) {
        const double mag = std::abs(w.data[i]) / pair.w_max * span;
        if (w.data[i] >= 0.0)
            pair.g_plus.data[i] = map.g_ref_uS + mag;
        else
            pair.g_minus.data[i] = map.g_ref_uS + mag;
    }
    return pair;
}

void inject_noise(ConductancePair& pair, const NoiseModel& noise, const ConductanceMap& map) {
    if (noise.sigma_uS < 0.0) throw ConfigError("noise: sigma must be >= 0");
    Rng rng(derive_seed(noise.seed, 0x90153));
    auto perturb = [&](Tensor& g) {
        for (double& v : g.data)
            v = std::clamp(v + noise.sigma_uS * rng.gaussian(), map.g_min_uS, map.g_max_uS);
    };
    perturb(pair.g_plus);
    perturb(pair.g_minus);
}

Tensor reconstruct_weights(const ConductancePair& pair, const ConductanceMap& map) {
    Tensor w = Tensor::zeros(pair.g_plus.shape);
    const double span = map.g_max_uS - map.g_ref_uS;
    for (size_t i = 0; i < w.data.size(); ++i)
        w.data[i] = (pair.g_plus.data[i] - pair.g_minus.data[i]) / span * pair.w_max;
    return w;
}

DegradedFlow degraded_inference(FlowWeights& w, const ConductanceMap& map, const NoiseModel& noise,
                                const LatticeAction& action, int eval_batch, uint64_t eval_seed) {
    map.validate();
    DegradedFlow out;
    out.weights = w;
    out.context = HardwareContext{map.dac_bits, map.adc_bits};
    out.eval_batch = eval_batch;
    out.eval_seed = eval_seed;

    uint64_t tensor_stream = 0;
    for (auto& ref : out.weights.tensors()) {
        ++tensor_stream;
        if (ref.partition != Partition::analog) continue;
        ConductancePair pair = map_weights(*ref.tensor, map);
        NoiseModel per_tensor{noise.sigma_uS, derive_seed(noise.seed, tensor_stream)};
        inject_noise(pair, per_tensor, map);
        *ref.tensor = reconstruct_weights(pair, map);
    }

    out.ess_clean = evaluate_ess(w, action, eval_batch, eval_seed, nullptr);
    out.ess_degraded = evaluate_ess(out.weights, action, eval_batch, eval_seed, &out.context);
    return out;
}

std::pair<FlowWeights, RecoveryReport>
lora_recovery(const DegradedFlow& degraded, const LatticeAction& action, TrainHyper hyper) {
    hyper.mode = TrainMode::lora_only;
    auto [recovered, report] = train(degraded.weights, action, hyper, &degraded.context);
    (void)report;
    RecoveryReport rec;
    rec.ess_clean = degraded.ess_clean;
    rec.ess_degraded = degraded.ess_degraded;
    FlowWeights tmp = recovered;
    rec.ess_recovered =
        evaluate_ess(tmp, action, degraded.eval_batch, degraded.eval_seed, &degraded.context);
    return {std::move(recovered), rec};
}

namespace {

double vmm_energy(const VmmShape& v, const CostConstants& c) {
    // tile an (input x output) crossbar onto array_size^2 blocks; DAC per
    // tile row, TIA+ADC per tile column
    const int A = c.array_size;
    double e = 0.0;
    for (int i0 = 0; i0 < v.input; i0 += A) {
        const int rows = std::min(A, v.input - i0);
        for (int j0 = 0; j0 < v.output; j0 += A) {
            const int cols = std::min(A, v.output - j0);
            e += static_cast<double>(rows) * cols * c.e_cell_J + rows * c.e_dac_J +
                 cols * (c.e_tia_J + c.e_adc_J);
        }
    }
    return e * static_cast<double>(v.count);
}

} // namespace

EnergyReport energy_report(const std::vector<LayerProfile>& profiles, const CostConstants& c) {
    c.validate();
    EnergyReport rep;
    int64_t total_macs = 0;
    for (const auto& lp : profiles) {
        EnergyReport::Layer layer;
        layer.name = lp.name;
        double analog_J = 0.0;
        for (const auto& v : lp.vmms) analog_J += vmm_energy(v, c);
        layer.hybrid_J = analog_J + static_cast<double>(lp.digital_macs) * c.e_digital_mac_J;
        layer.digital_only_J =
            static_cast<double>(lp.analog_macs + lp.digital_macs) * c.e_digital_mac_J;
        rep.hybrid_J += layer.hybrid_J;
        rep.digital_J += layer.digital_only_J;
        total_macs += lp.analog_macs + lp.digital_macs;
        rep.layers.push_back(std::move(layer));
    }
    rep.efficiency_ratio = rep.hybrid_J > 0.0 ? rep.digital_J / rep.hybrid_J : 1.0;
    rep.hybrid_macs_per_J = rep.hybrid_J > 0.0 ? total_macs / rep.hybrid_J : 0.0;
    rep.digital_macs_per_J = rep.digital_J > 0.0 ? total_macs / rep.digital_J : 0.0;
    return rep;
}

LatencyReport latency_report(const std::vector<LayerProfile>& profiles, const CostConstants& c) {
    c.validate();
    const double analog_flops = c.analog_tflops_mm2 * 1e12 * c.area_mm2;
    const double digital_flops = c.digital_tflops_mm2 * 1e12 * c.area_mm2;
    LatencyReport rep;
    for (const auto& lp : profiles) {
        LatencyReport::Layer layer;
        layer.name = lp.name;
        const double ta = static_cast<double>(lp.analog_macs) * c.flops_per_mac / analog_flops;
        const double td = static_cast<double>(lp.digital_macs) * c.flops_per_mac / digital_flops;
        layer.hybrid_s = std::max(ta, td); // the slower side gates the layer
        layer.digital_only_s =
            static_cast<double>(lp.analog_macs + lp.digital_macs) * c.flops_per_mac / digital_flops;
        rep.hybrid_s += layer.hybrid_s;
        rep.digital_s += layer.digital_only_s;
        rep.layers.push_back(std::move(layer));
    }
    rep.speedup = rep.hybrid_s > 0.0 ? rep.digital_s / rep.hybrid_s : 1.0;
    return rep;
}

std::vector<ScalingRow> scaling_sweep(const std::vector<int>& sizes, const MixerConfig& family,
                                      const CostConstants& c) {
    std::vector<ScalingRow> rows;
    for (int L : sizes) {
        MixerConfig cfg = family;
        cfg.height = L;
        cfg.width = L;
        cfg.validate();
        const auto profiles = layer_profiles(cfg);
        const MacCounts mc = count_params_and_macs(cfg);
        const EnergyReport er = energy_report(profiles, c);
        const LatencyReport lr = latency_report(profiles, c);
        rows.push_back(ScalingRow{L, mc.analog_mac_fraction(), lr.speedup, er.efficiency_ratio});
    }
    return rows;
}

std::string hardware_report_json(const std::vector<LayerProfile>& profiles,
                                 const CostConstants& c, const RecoveryReport* rec,
                                 const NoiseModel* noise) {
    const EnergyReport er = energy_report(profiles, c);
    const LatencyReport lr = latency_report(profiles, c);

    nlohmann::json doc;
    doc["schema_version"] = 1;
    auto& layers = doc["per_layer"];
    layers = nlohmann::json::array();
    for (size_t i = 0; i < profiles.size(); ++i) {
        nlohmann::json row;
        row["layer"] = profiles[i].name;
        row["analog_macs"] = profiles[i].analog_macs;
        row["digital_macs"] = profiles[i].digital_macs;
        row["hybrid_J"] = er.layers[i].hybrid_J;
        row["digital_J"] = er.layers[i].digital_only_J;
        row["hybrid_s"] = lr.layers[i].hybrid_s;
        row["digital_s"] = lr.layers[i].digital_only_s;
        layers.push_back(std::move(row));
    }
    doc["totals"] = {{"hybrid_J", er.hybrid_J},
                     {"digital_J", er.digital_J},
                     {"hybrid_s", lr.hybrid_s},
                     {"digital_s", lr.digital_s},
                     {"speedup", lr.speedup},
                     {"energy_ratio", er.efficiency_ratio},
                     {"macs_per_joule", er.hybrid_macs_per_J}};
    if (noise) doc["noise"] = {{"sigma_uS", noise->sigma_uS}, {"seed", noise->seed}};
    if (rec)
        doc["ess"] = {{"clean", rec->ess_clean},
                      {"degraded", rec->ess_degraded},
                      {"recovered", rec->ess_recovered}};
    return doc.dump(2);
}

} // namespace lft
