#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lft/flow.hpp"
#include "lft/lattice.hpp"

namespace lft {

enum class TrainMode { full, lora_only };

struct TrainHyper {
    int batch_size = 128;
    int steps = 1500;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double lr_decay = 0.05;  // cosine decay floor as a fraction of learning_rate
    uint64_t seed = 1;
    double ess_target = 1.0; // evaluation reaching this stops training early
    TrainMode mode = TrainMode::full;
    int eval_every = 100;
    int eval_batch = 4096;

    void validate() const;
};

struct TrainReport {
    std::vector<double> loss;        // one entry per step
    std::vector<double> ess;         // one entry per evaluation
    double final_ess = 0.0;
    double wall_seconds = 0.0;
    int steps_run = 0;
};

/// Thrown when the loss goes non-finite; carries the most recent
/// evaluated checkpoint and the partial report.
struct TrainingDiverged : TrainingDivergenceError {
    TrainingDiverged(const std::string& msg, FlowWeights last_good_, TrainReport partial_)
        : TrainingDivergenceError(msg), last_good(std::move(last_good_)), partial(std::move(partial_)) {}
    FlowWeights last_good;
    TrainReport partial;
};

/// Tape node for S(phi) per sample; backward uses the analytic lattice
/// gradient, so the loss differentiates through the sampled path.
NodeId action_node(Tape& tape, NodeId phi, const LatticeAction& action,
                   const LatticeGeometry& geom);

/// loss = (1/N) sum_i [log q(phi_i) + S(phi_i)]: the shifted reverse KL,
/// exact up to the constant log Z. Throws TrainingDivergenceError naming
/// the first non-finite batch index.
NodeId reverse_kl_loss(Tape& tape, NodeId log_q, NodeId actions);

/// Eq.-(11)-style effective sample size, computed in log space with a
/// max shift; result in (0, 1] and invariant under adding a constant to
/// all log ratios.
double ess(const std::vector<double>& log_q, const std::vector<double>& log_p_unnorm);

/// ESS of the flow against e^{-S} on a held-out batch (inference mode).
double evaluate_ess(FlowWeights& w, const LatticeAction& action, int n, uint64_t seed,
                    const HardwareContext* hw = nullptr);

/// Re-estimates the frozen normalization statistics as an exact average
/// over fresh training-mode batches, so the frozen-statistics flow matches
/// the transform the optimizer saw. Touches only running statistics.
void recalibrate_batchnorm(FlowWeights& w, int batches, int batch_size, uint64_t seed,
                           const HardwareContext* hw = nullptr);

/// Action-guided reverse-KL training with an adaptive-moment optimizer.
/// In lora_only mode the analog-tagged tensors are frozen bit-exactly;
/// only LoRA pairs, time embeddings and normalization parameters move.
std::pair<FlowWeights, TrainReport> train(const FlowWeights& w0, const LatticeAction& action,
                                          const TrainHyper& hyper,
                                          const HardwareContext* hw = nullptr);

/// LoRA-only adaptation of a trained flow to new action parameters.
FlowWeights finetune_lora(const FlowWeights& trained, const LatticeAction& new_action,
                          TrainHyper hyper, TrainReport* report = nullptr,
                          const HardwareContext* hw = nullptr);

} // namespace lft
