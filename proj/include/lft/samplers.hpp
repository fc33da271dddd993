#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lft/flow.hpp"
#include "lft/lattice.hpp"

namespace lft {

struct HmcParams {
    double step_size = 0.1;
    int n_leapfrog = 10;
    int n_samples = 2000; // raw post-burn-in steps; retained count = n_samples / thin
    int burn_in = 1000;
    int thin = 20;
    uint64_t seed = 0;
    bool auto_tune = true; // adjust step size during burn-in toward acceptance in [0.7, 0.9]

    void validate() const;
};

struct EnsembleEntry {
    double action = 0.0;
    double log_q = 0.0;
    bool has_log_q = false;
    bool accepted = false;
    int64_t proposal_index = 0; // raw chain step this entry came from
};

/// Ordered Markov chain output with per-sample bookkeeping.
struct Ensemble {
    LatticeGeometry geometry;
    std::vector<FieldConfiguration> configs;
    std::vector<EnsembleEntry> entries;
    std::string sampler;
    uint64_t seed = 0;
    double acceptance_rate = 0.0;

    size_t size() const { return configs.size(); }
};

using GradientFn = std::function<FieldConfiguration(const FieldConfiguration&)>;

/// Kick-drift-kick symplectic integration with force = -grad(S).
/// Time-reversible: running again with negated momentum returns to the start.
std::pair<FieldConfiguration, FieldConfiguration>
leapfrog(const FieldConfiguration& phi, const FieldConfiguration& momentum, double eps, int n,
         const GradientFn& grad);

Ensemble hmc_chain(const FieldConfiguration& initial, const LatticeAction& action,
                   const HmcParams& params);

/// Independence Metropolis over flow proposals; acceptance depends only on
/// the (log q, S) pairs. The first proposal is always accepted; rejected
/// steps repeat the previous configuration.
Ensemble flow_mh_chain(const std::vector<FlowSampleRecord>& records, const LatticeAction& action,
                       uint64_t seed);

/// flow_sample (inference mode) followed by flow_mh_chain.
Ensemble propose_and_sample(FlowWeights& w, const LatticeAction& action, int n, uint64_t seed,
                            const HardwareContext* hw = nullptr);

} // namespace lft
