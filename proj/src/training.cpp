#include "lft/training.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <string>

#include "lft/rng.hpp"

namespace lft {

void TrainHyper::validate() const {
    if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2 (batchnorm)");
    if (steps < 0) throw ConfigError("train: steps must be >= 0");
    if (learning_rate <= 0.0) throw ConfigError("train: learning rate must be > 0");
    if (!(ess_target > 0.0 && ess_target <= 1.0))
        throw ConfigError("train: ess_target must be in (0, 1]");
    if (eval_every < 1 || eval_batch < 1) throw ConfigError("train: eval settings must be >= 1");
}

NodeId action_node(Tape& tape, NodeId phi, const LatticeAction& action,
                   const LatticeGeometry& geom) {
    auto to_cfg = [geom](std::span<const double> v) {
        return FieldConfiguration{geom, std::vector<double>(v.begin(), v.end())};
    };
    return tape.per_sample_scalar(
        phi,
        [action, to_cfg](std::span<const double> v) { return action.value(to_cfg(v)); },
        [action, to_cfg](std::span<const double> v) { return action.gradient(to_cfg(v)).values; });
}

NodeId reverse_kl_loss(Tape& tape, NodeId log_q, NodeId actions) {
    const Tensor& q = tape.value(log_q);
    const Tensor& s = tape.value(actions);
    if (q.shape != s.shape || q.shape.size() != 1)
        throw ShapeError("reverse_kl_loss: log_q and actions must be equal-length vectors");
    for (int64_t i = 0; i < q.numel(); ++i) {
        if (!std::isfinite(q.data[static_cast<size_t>(i)]) ||
            !std::isfinite(s.data[static_cast<size_t>(i)]))
            throw TrainingDivergenceError("reverse_kl_loss: non-finite term at batch index " +
                                          std::to_string(i));
    }
    return tape.mean(tape.add(log_q, actions));
}

double ess(const std::vector<double>& log_q, const std::vector<double>& log_p_unnorm) {
    if (log_q.empty() || log_q.size() != log_p_unnorm.size())
        throw InvalidInputError("ess: batches must be nonempty and equal length");
    const size_t n = log_q.size();
    double shift = -HUGE_VAL;
    for (size_t i = 0; i < n; ++i) {
        const double lw = log_p_unnorm[i] - log_q[i];
        if (std::isnan(lw)) throw InvalidInputError("ess: non-finite log ratio");
        shift = std::max(shift, lw);
    }
    if (shift == -HUGE_VAL) throw DegenerateBatchError("ess: all importance weights are zero");
    double s1 = 0.0, s2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double w = std::exp(log_p_unnorm[i] - log_q[i] - shift);
        s1 += w;
        s2 += w * w;
    }
    return (s1 * s1) / (static_cast<double>(n) * s2);
}

double evaluate_ess(FlowWeights& w, const LatticeAction& action, int n, uint64_t seed,
                    const HardwareContext* hw) {
    const auto records = flow_sample(w, n, seed, hw);
    std::vector<double> lq, lp;
    lq.reserve(records.size());
    lp.reserve(records.size());
    for (const auto& r : records) {
        lq.push_back(r.log_q);
        lp.push_back(-action.value(r.config));
    }
    return ess(lq, lp);
}

void recalibrate_batchnorm(FlowWeights& w, int batches, int batch_size, uint64_t seed,
                           const HardwareContext* hw) {
    if (batches < 1 || batch_size < 2)
        throw ConfigError("recalibrate_batchnorm: need >= 1 batch of >= 2 samples");
    const LatticeGeometry geom = w.config.geometry();
    Rng rng(derive_seed(seed, 0xca1b));
    // momentum 1/k turns the EMA into a cumulative average over the pass
    for (int k = 1; k <= batches; ++k) {
        for (auto& blk : w.blocks) {
            blk.tn_state.momentum = 1.0 / k;
            blk.cn_state.momentum = 1.0 / k;
        }
        Tensor prior = Tensor::zeros({batch_size, geom.dims[0], geom.dims[1]});
        for (double& v : prior.data) v = rng.gaussian();
        Tape tape;
        BoundWeights bw = bind_weights(tape, w, Mode::training, hw);
        flow_forward(tape, bw, prior);
    }
    for (auto& blk : w.blocks) {
        blk.tn_state.momentum = 0.1;
        blk.cn_state.momentum = 0.1;
    }
}

namespace {

// Adaptive-moment optimizer over the bound parameter list.
class Adam {
public:
    Adam(double lr, double b1, double b2) : lr_(lr), b1_(b1), b2_(b2) {}

    void step(Tape& tape, const std::vector<BoundParam>& params, TrainMode mode, double lr_scale) {
        ++t_;
        const double lr = lr_ * lr_scale;
        const double c1 = 1.0 - std::pow(b1_, t_);
        const double c2 = 1.0 - std::pow(b2_, t_);
        for (const auto& p : params) {
            if (!p.trainable) continue;
            if (mode == TrainMode::lora_only && p.partition != Partition::digital) continue;
            const Tensor& g = tape.grad(p.node);
            if (g.data.empty()) continue; // parameter unused in this graph
            auto& [m, v] = state_[p.name];
            if (m.size() != g.data.size()) {
                m.assign(g.data.size(), 0.0);
                v.assign(g.data.size(), 0.0);
            }
            for (size_t i = 0; i < g.data.size(); ++i) {
                m[i] = b1_ * m[i] + (1.0 - b1_) * g.data[i];
                v[i] = b2_ * v[i] + (1.0 - b2_) * g.data[i] * g.data[i];
                p.param->data[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + 1e-8);
            }
        }
    }

private:
    double lr_, b1_, b2_;
    int64_t t_ = 0;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> state_;
};

} // namespace

std::pair<FlowWeights, TrainReport> train(const FlowWeights& w0, const LatticeAction& action,
                                          const TrainHyper& hyper, const HardwareContext* hw) {
    hyper.validate();
    const auto t_start = std::chrono::steady_clock::now();

    FlowWeights w = w0;
    const LatticeGeometry geom = w.config.geometry();
    const int V = geom.volume();

    Rng batch_rng(derive_seed(hyper.seed, 0xba7c4));
    const uint64_t eval_seed = derive_seed(hyper.seed, 0xe55);

    Adam adam(hyper.learning_rate, hyper.beta1, hyper.beta2);
    TrainReport report;
    FlowWeights last_good = w;
    bool reached_target = false;

    for (int step = 0; step < hyper.steps; ++step) {
        Tensor prior = Tensor::zeros({hyper.batch_size, geom.dims[0], geom.dims[1]});
        for (double& v : prior.data) v = batch_rng.gaussian();

        // cosine decay from 1 to the lr_decay floor across the run
        const double progress = hyper.steps > 1 ? static_cast<double>(step) / (hyper.steps - 1) : 1.0;
        const double lr_scale =
            hyper.lr_decay + (1.0 - hyper.lr_decay) * 0.5 * (1.0 + std::cos(M_PI * progress));

        try {
            Tape tape;
            BoundWeights bw = bind_weights(tape, w, Mode::training, hw);
            FlowForward ff = flow_forward(tape, bw, prior);
            NodeId S = action_node(tape, ff.phi, action, geom);
            NodeId loss = reverse_kl_loss(tape, ff.log_q, S);
            report.loss.push_back(tape.value(loss).data[0]);
            tape.backward(loss);
            adam.step(tape, bw.params, hyper.mode, lr_scale);
        } catch (const TrainingDivergenceError& e) {
            throw TrainingDiverged(std::string(e.what()) + " at step " + std::to_string(step),
                                   std::move(last_good), std::move(report));
        } catch (const NumericRangeError& e) {
            throw TrainingDiverged(std::string(e.what()) + " at step " + std::to_string(step),
                                   std::move(last_good), std::move(report));
        }
        report.steps_run = step + 1;

        if ((step + 1) % hyper.eval_every == 0) {
            recalibrate_batchnorm(w, 16, hyper.batch_size, derive_seed(hyper.seed, 0x7eca), hw);
            const double e = evaluate_ess(w, action, hyper.eval_batch, eval_seed, hw);
            report.ess.push_back(e);
            last_good = w;
            if (e >= hyper.ess_target) {
                reached_target = true;
                break;
            }
        }
    }

    if (!reached_target &&
        (report.ess.empty() || hyper.steps % hyper.eval_every != 0 || hyper.steps == 0)) {
        if (report.steps_run > 0)
            recalibrate_batchnorm(w, 16, hyper.batch_size, derive_seed(hyper.seed, 0x7eca), hw);
        report.ess.push_back(evaluate_ess(w, action, hyper.eval_batch, eval_seed, hw));
    }
    report.final_ess = report.ess.back();
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    (void)V;
    return {std::move(w), std::move(report)};
}

FlowWeights finetune_lora(const FlowWeights& trained, const LatticeAction& new_action,
                          TrainHyper hyper, TrainReport* report, const HardwareContext* hw) {
    hyper.mode = TrainMode::lora_only;
    auto [w, rep] = train(trained, new_action, hyper, hw);
    if (report) *report = std::move(rep);
    return std::move(w);
}

} // namespace lft
