#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lft/flow.hpp"
#include "lft/training.hpp"

namespace lft {

// ---------------------------------------------------------------------------
// Device model
// ---------------------------------------------------------------------------

struct ConductanceMap {
    double g_min_uS = 20.0;
    double g_max_uS = 80.0;
    double v_min = -0.1;
    double v_max = 0.1;
    double g_ref_uS = 50.0;
    int dac_bits = 16;
    int adc_bits = 14;

    void validate() const;
};

struct NoiseModel {
    double sigma_uS = 0.54; // programming error std; 1.79 reproduces the
                            // +-3.5 uS / 95% tolerance characterization
    uint64_t seed = 0;
};

/// Per-operation energy/latency constants of the cost model.
struct CostConstants {
    double e_digital_mac_J = 549e-15;
    double e_cell_J = 2.0e-15;
    double e_dac_J = 0.227e-12;
    double e_tia_J = 3e-12;
    double e_adc_J = 11.3e-12;
    double analog_tflops_mm2 = 5.72;
    double digital_tflops_mm2 = 0.14;
    double area_mm2 = 1.0;
    int flops_per_mac = 2;
    int array_size = 32; // crossbar tile edge

    void validate() const;
};

// ---------------------------------------------------------------------------
// Weight programming
// ---------------------------------------------------------------------------

/// Differential conductance pair: |w|/w_max mapped onto [g_ref, g_max] on
/// the side matching the sign, g_ref on the other. Reconstruction
/// w = (G+ - G-) / (g_max - g_ref) * w_max is exact before noise.
struct ConductancePair {
    Tensor g_plus;
    Tensor g_minus;
    double w_max = 0.0;
};

ConductancePair map_weights(const Tensor& w, const ConductanceMap& map);
void inject_noise(ConductancePair& pair, const NoiseModel& noise, const ConductanceMap& map);
Tensor reconstruct_weights(const ConductancePair& pair, const ConductanceMap& map);

// ---------------------------------------------------------------------------
// Degraded inference and LoRA error recovery
// ---------------------------------------------------------------------------

struct DegradedFlow {
    FlowWeights weights;     // analog tensors programmed through map -> noise -> read-back
    HardwareContext context; // DAC/ADC quantization active on analog layers
    double ess_clean = 0.0;
    double ess_degraded = 0.0;
    int eval_batch = 0;
    uint64_t eval_seed = 0;
};

/// Programs every analog-tagged tensor through the conductance map with
/// programming noise, leaving digital tensors untouched, and reports clean
/// vs degraded ESS on a fixed evaluation batch.
DegradedFlow degraded_inference(FlowWeights& w, const ConductanceMap& map, const NoiseModel& noise,
                                const LatticeAction& action, int eval_batch, uint64_t eval_seed);

struct RecoveryReport {
    double ess_clean = 0.0;
    double ess_degraded = 0.0;
    double ess_recovered = 0.0;
};

/// LoRA-only fine-tuning against the action with the noisy analog tensors
/// frozen in place (bitwise) and quantization in the loop.
std::pair<FlowWeights, RecoveryReport>
lora_recovery(const DegradedFlow& degraded, const LatticeAction& action, TrainHyper hyper);

// ---------------------------------------------------------------------------
// Energy / latency reports
// ---------------------------------------------------------------------------

struct EnergyReport {
    struct Layer {
        std::string name;
        double hybrid_J = 0.0;       // analog VMM energy + digital-side MAC energy
        double digital_only_J = 0.0; // everything at the digital MAC cost
    };
    std::vector<Layer> layers;
    double hybrid_J = 0.0;
    double digital_J = 0.0;
    double efficiency_ratio = 0.0;   // digital_J / hybrid_J
    double hybrid_macs_per_J = 0.0;
    double digital_macs_per_J = 0.0;
};

/// Analog VMM energy = cells*e_cell + inputs*e_dac + outputs*(e_tia+e_adc),
/// charged per 32x32 tile; digital MACs at e_digital_mac.
EnergyReport energy_report(const std::vector<LayerProfile>& profiles, const CostConstants& c);

struct LatencyReport {
    struct Layer {
        std::string name;
        double hybrid_s = 0.0; // max(analog part, digital part)
        double digital_only_s = 0.0;
    };
    std::vector<Layer> layers;
    double hybrid_s = 0.0;
    double digital_s = 0.0;
    double speedup = 0.0;
};

LatencyReport latency_report(const std::vector<LayerProfile>& profiles, const CostConstants& c);

// ---------------------------------------------------------------------------
// Lattice-size scaling sweep
// ---------------------------------------------------------------------------

struct ScalingRow {
    int lattice = 0;
    double analog_mac_fraction = 0.0;
    double speedup = 0.0;
    double energy_ratio = 0.0;
};

/// Applies the config family to square lattices of the given sizes and
/// reports MAC partition, speedup and energy ratio per size.
std::vector<ScalingRow> scaling_sweep(const std::vector<int>& sizes, const MixerConfig& family,
                                      const CostConstants& c);

/// Versioned JSON document with per-layer rows and totals; `rec` may be null.
std::string hardware_report_json(const std::vector<LayerProfile>& profiles,
                                 const CostConstants& c, const RecoveryReport* rec = nullptr,
                                 const NoiseModel* noise = nullptr);

} // namespace lft
