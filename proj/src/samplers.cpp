#include "lft/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lft/rng.hpp"

namespace lft {

void HmcParams::validate() const {
    if (step_size <= 0.0) throw ConfigError("hmc: step_size must be > 0");
    if (n_leapfrog < 1) throw ConfigError("hmc: n_leapfrog must be >= 1");
    if (n_samples < 1) throw ConfigError("hmc: n_samples must be >= 1");
    if (burn_in < 0) throw ConfigError("hmc: burn_in must be >= 0");
    if (thin < 1) throw ConfigError("hmc: thin must be >= 1");
}

std::pair<FieldConfiguration, FieldConfiguration>
leapfrog(const FieldConfiguration& phi, const FieldConfiguration& momentum, double eps, int n,
         const GradientFn& grad) {
    if (!(phi.geometry == momentum.geometry))
        throw InvalidInputError("leapfrog: geometry mismatch");
    FieldConfiguration q = phi, p = momentum;
    const size_t V = q.values.size();

    auto check_finite = [&] {
        for (size_t k = 0; k < V; ++k)
            if (!std::isfinite(q.values[k]))
                throw TrajectoryDivergenceError("leapfrog: non-finite trajectory");
    };
    auto kick = [&](double h) {
        const FieldConfiguration g = grad(q);
        for (size_t k = 0; k < V; ++k) p.values[k] -= h * g.values[k];
    };

    kick(eps / 2.0);
    for (int i = 0; i < n; ++i) {
        for (size_t k = 0; k < V; ++k) q.values[k] += eps * p.values[k];
        check_finite();
        kick(i + 1 < n ? eps : eps / 2.0);
    }
    for (size_t k = 0; k < V; ++k)
        if (!std::isfinite(p.values[k]))
            throw TrajectoryDivergenceError("leapfrog: non-finite trajectory");
    return {std::move(q), std::move(p)};
}

namespace {

double kinetic(const FieldConfiguration& p) {
    double k = 0.0;
    for (double v : p.values) k += 0.5 * v * v;
    return k;
}

} // namespace

Ensemble hmc_chain(const FieldConfiguration& initial, const LatticeAction& action,
                   const HmcParams& params) {
    params.validate();
    initial.validate();

    Rng rng(derive_seed(params.seed, 0x4a3c));
    FieldConfiguration phi = initial;
    double eps = params.step_size;
    int nl = params.n_leapfrog;
    const GradientFn grad = [&action](const FieldConfiguration& c) { return action.gradient(c); };

    auto one_step = [&](bool& accepted) {
        FieldConfiguration mom = FieldConfiguration::zeros(phi.geometry);
        for (double& v : mom.values) v = rng.gaussian();
        accepted = false;
        try {
            const double h0 = action.value(phi) + kinetic(mom);
            auto [q, p] = leapfrog(phi, mom, eps, nl, grad);
            const double h1 = action.value(q) + kinetic(p);
            const double dh = h1 - h0;
            const double u = rng.uniform(); // drawn unconditionally to keep the stream aligned
            accepted = dh <= 0.0 || u < std::exp(-dh);
            if (accepted) phi = std::move(q);
        } catch (const TrajectoryDivergenceError&) {
            // divergent trajectory counts as a rejection
        }
    };

    // burn-in with optional step-size tuning toward acceptance in [0.7, 0.9]
    int window_acc = 0, window_n = 0;
    for (int i = 0; i < params.burn_in; ++i) {
        bool acc = false;
        one_step(acc);
        window_acc += acc ? 1 : 0;
        ++window_n;
        if (params.auto_tune && window_n == 100) {
            const double rate = static_cast<double>(window_acc) / window_n;
            if (rate > 0.9)
                eps *= 1.25;
            else if (rate < 0.7)
                eps *= 0.8;
            nl = std::clamp(static_cast<int>(std::lround(1.0 / eps)), 1, 1000);
            window_acc = window_n = 0;
        }
    }

    Ensemble ens;
    ens.geometry = phi.geometry;
    ens.sampler = "hmc";
    ens.seed = params.seed;

    int accepted_total = 0;
    int recent_acc = 0, recent_n = 0;
    for (int i = 0; i < params.n_samples; ++i) {
        bool acc = false;
        one_step(acc);
        accepted_total += acc ? 1 : 0;
        recent_acc += acc ? 1 : 0;
        if (++recent_n == 500) {
            const double rate = static_cast<double>(recent_acc) / recent_n;
            if (rate < 0.05) {
                std::ostringstream os;
                os << "hmc: acceptance " << rate << " over a 500-step window (eps=" << eps
                   << ", n_leapfrog=" << nl << "); retune step size";
                throw TuningError(os.str());
            }
            recent_acc = recent_n = 0;
        }
        if ((i + 1) % params.thin == 0) {
            ens.configs.push_back(phi);
            ens.entries.push_back(EnsembleEntry{action.value(phi), 0.0, false, acc, i});
        }
    }
    ens.acceptance_rate = static_cast<double>(accepted_total) / params.n_samples;
    return ens;
}

Ensemble flow_mh_chain(const std::vector<FlowSampleRecord>& records, const LatticeAction& action,
                       uint64_t seed) {
    if (records.empty()) throw InvalidInputError("flow_mh_chain: no proposals");
    Rng rng(derive_seed(seed, 0xacce));

    Ensemble ens;
    ens.geometry = records.front().config.geometry;
    ens.sampler = "flow-mh";
    ens.seed = seed;

    double cur_logq = 0.0, cur_action = 0.0;
    int accepted_total = 0;
    for (size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (!std::isfinite(rec.log_q))
            throw InvalidProposalError("flow_mh_chain: proposal " + std::to_string(i) +
                                       " is missing a finite log_q");
        const double prop_action = action.value(rec.config);
        bool accept;
        if (i == 0) {
            accept = true; // independence-sampler initialization
        } else {
            double log_a = (cur_logq + cur_action) - (rec.log_q + prop_action);
            log_a = std::clamp(log_a, -700.0, 700.0);
            accept = log_a >= 0.0 ? true : rng.uniform() < std::exp(log_a);
        }
        if (accept) {
            ens.configs.push_back(rec.config);
            ens.entries.push_back(EnsembleEntry{prop_action, rec.log_q, true, true,
                                                static_cast<int64_t>(i)});
            cur_logq = rec.log_q;
            cur_action = prop_action;
            ++accepted_total;
        } else {
            ens.configs.push_back(ens.configs.back());
            ens.entries.push_back(EnsembleEntry{cur_action, cur_logq, true, false,
                                                static_cast<int64_t>(i)});
        }
    }
    ens.acceptance_rate = static_cast<double>(accepted_total) / records.size();
    return ens;
}

Ensemble propose_and_sample(FlowWeights& w, const LatticeAction& action, int n, uint64_t seed,
                            const HardwareContext* hw) {
    const auto records = flow_sample(w, n, derive_seed(seed, 0x9a07), hw);
    Ensemble ens = flow_mh_chain(records, action, derive_seed(seed, 0x3141));
    ens.seed = seed;
    return ens;
}

} // namespace lft
