#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lft/lattice.hpp"
#include "lft/tensor.hpp"

namespace lft {

// ---------------------------------------------------------------------------
// Configuration and weights
// ---------------------------------------------------------------------------

struct MixerConfig {
    int patch_size = 2;      // P, divides both lattice extents
    int channels = 64;       // C
    int mixer_blocks = 2;    // m
    int token_hidden = 64;   // D_s
    int channel_hidden = 256; // D_c
    int timesteps = 8;       // T, even
    int lora_rank = 2;       // r
    int height = 4;          // = dims[0]
    int width = 4;           // = dims[1]

    int patches() const { return (height / patch_size) * (width / patch_size); }
    LatticeGeometry geometry() const { return LatticeGeometry{{height, width}, 1.0}; }
    void validate() const;
};

enum class Partition : uint8_t { analog = 0, digital = 1 };

/// Low-rank adapter attached in parallel with a base linear layer:
/// contribution x . A . B with A (in, r), B (r, out). No biases.
struct LoraPair {
    Tensor a;
    Tensor b;
};

struct MixerBlockWeights {
    Tensor tn_gamma, tn_beta;       // token-mix batchnorm affine
    BatchNormState tn_state;
    Tensor w1, b1, w2, b2;          // token mixing, W1 (s, D_s), W2 (D_s, s)
    LoraPair l1, l2;
    Tensor cn_gamma, cn_beta;       // channel-mix batchnorm affine
    BatchNormState cn_state;
    Tensor w3, b3, w4, b4;          // channel mixing, W3 (C, D_c), W4 (D_c, C)
    LoraPair l3, l4;
};

/// Every ANF parameter. Base/embedding/regression tensors are
/// analog-eligible; LoRA pairs, time embeddings and normalization state
/// are digital. Weights are shared across all timesteps; only the time
/// embedding row differs per t.
struct FlowWeights {
    MixerConfig config;
    Tensor patch_w, patch_b;  // (P^2, C), (C)
    Tensor time_embed;        // (T, C)
    std::vector<MixerBlockWeights> blocks;
    Tensor out_w, out_b;      // (C, 2 P^2), (2 P^2); transposed convolution as a per-patch map
    Tensor px_w, px_b;        // (2, 2), (2); per-pixel regression

    struct TensorRef {
        std::string name;
        Tensor* tensor;
        Partition partition;
        bool trainable;       // running statistics are serialized but not optimized/counted
    };
    std::vector<TensorRef> tensors(); // stable, name-sorted declaration order
};

FlowWeights init_flow_weights(const MixerConfig& cfg, uint64_t seed);

// ---------------------------------------------------------------------------
// Hardware-in-the-loop evaluation context
// ---------------------------------------------------------------------------

/// When present, analog linear layers quantize their input activations at
/// DAC resolution and their matmul outputs at ADC resolution (symmetric,
/// per-call dynamic range). Digital layers (LoRA, batchnorm, time
/// embeddings, coupling updates) are untouched.
struct HardwareContext {
    int dac_bits = 16;
    int adc_bits = 14;
};

// ---------------------------------------------------------------------------
// Tape-level forward pass (shared by training and sampling)
// ---------------------------------------------------------------------------

struct BoundParam {
    std::string name;
    NodeId node;
    Tensor* param;
    Partition partition;
    bool trainable;
};

/// One forward pass's view of the weights: a tape leaf per tensor plus
/// bookkeeping for the optimizer. Training mode lets batchnorm update its
/// running statistics inside `weights`.
struct BoundWeights {
    FlowWeights* weights = nullptr;
    Mode mode = Mode::inference;
    const HardwareContext* hw = nullptr;
    std::vector<BoundParam> params;

    struct Block {
        NodeId tn_gamma, tn_beta, w1, b1, w2, b2, l1a, l1b, l2a, l2b;
        NodeId cn_gamma, cn_beta, w3, b3, w4, b4, l3a, l3b, l4a, l4b;
    };
    NodeId patch_w, patch_b, time_embed, out_w, out_b, px_w, px_b;
    std::vector<Block> blocks;
};

BoundWeights bind_weights(Tape& tape, FlowWeights& w, Mode mode,
                          const HardwareContext* hw = nullptr);

/// Conditioner on a batched masked field (B,H,W) at timestep t; returns
/// (s1, s2), both (B,H,W) and exactly zero on frozen sites.
std::pair<NodeId, NodeId> mixer_forward_node(Tape& tape, BoundWeights& bw, NodeId x_a, int t);

struct CouplingStep {
    NodeId x;       // (B,H,W)
    NodeId logdet;  // (B), sum over active sites of s2
};

CouplingStep coupling_inverse_node(Tape& tape, BoundWeights& bw, NodeId x, int t);
CouplingStep coupling_forward_node(Tape& tape, BoundWeights& bw, NodeId x_next, int t);

struct FlowForward {
    NodeId phi;                   // (B,H,W)
    NodeId log_q;                 // (B)
    std::vector<NodeId> logdets;  // per timestep, each (B)
    Tensor prior;                 // (B,H,W) Gaussian draw
    std::vector<double> log_r;    // per sample
};

/// Applies the T coupling layers to a prior draw and assembles
/// log q = log r + sum_t sum_active s2 (the change-of-variables identity
/// fixes the sign; verified against a numerical Jacobian in the tests).
FlowForward flow_forward(Tape& tape, BoundWeights& bw, const Tensor& prior);

// ---------------------------------------------------------------------------
// Plain-tensor API
// ---------------------------------------------------------------------------

struct ConditionerOutput {
    Tensor s1, s2; // (H, W)
};

ConditionerOutput mixer_forward(const FieldConfiguration& x_a, int t, FlowWeights& w,
                                Mode mode, const HardwareContext* hw = nullptr);

/// Single-field coupling step x -> ((x_b - s1) e^{-s2} + x_a, sum s2).
std::pair<Tensor, double> coupling_inverse(const Tensor& x, int t, FlowWeights& w,
                                           const HardwareContext* hw = nullptr);
/// Exact algebraic inverse of coupling_inverse.
std::pair<Tensor, double> coupling_forward(const Tensor& x_next, int t, FlowWeights& w,
                                           const HardwareContext* hw = nullptr);

struct FlowSampleRecord {
    Tensor prior;                     // (H, W) Gaussian input
    FieldConfiguration config;        // output field
    double log_r = 0.0;
    double log_q = 0.0;
    std::vector<double> layer_logdets; // length T
};

/// Draws n samples (inference mode, batchnorm frozen), deterministic for a
/// fixed seed. Batched internally; `chunk` bounds peak memory.
std::vector<FlowSampleRecord> flow_sample(FlowWeights& w, int n, uint64_t seed,
                                          const HardwareContext* hw = nullptr, int chunk = 128);

// ---------------------------------------------------------------------------
// Parameter / MAC accounting
// ---------------------------------------------------------------------------

struct VmmShape {
    int input = 0;
    int output = 0;
    int64_t count = 0; // applications per inference
};

/// Per-inference cost of one logical network layer, T timesteps folded in.
/// Analog and digital MACs within one layer run on their respective sides
/// in parallel.
struct LayerProfile {
    std::string name;
    int64_t analog_macs = 0;
    int64_t digital_macs = 0;
    std::vector<VmmShape> vmms; // analog matmuls for periphery accounting
};

std::vector<LayerProfile> layer_profiles(const MixerConfig& cfg);

struct MacCounts {
    int64_t analog_params = 0;
    int64_t digital_params = 0;
    int64_t analog_macs = 0;
    int64_t digital_macs = 0;

    double digital_param_fraction() const {
        return static_cast<double>(digital_params) /
               static_cast<double>(analog_params + digital_params);
    }
    double analog_mac_fraction() const {
        return static_cast<double>(analog_macs) / static_cast<double>(analog_macs + digital_macs);
    }
};

MacCounts count_params_and_macs(const MixerConfig& cfg);

} // namespace lft
