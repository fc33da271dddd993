#include "lft/flow.hpp"

#include <cmath>

#include "lft/rng.hpp"

namespace lft {

namespace {

Tensor gaussian_tensor(const Shape& s, Rng& rng, double sigma) {
    Tensor t = Tensor::zeros(s);
    for (double& v : t.data) v = sigma * rng.gaussian();
    return t;
}

Tensor mask_tensor(const LatticeGeometry& g, int t, bool complement) {
    const Mask m = checkerboard_mask(g, t);
    Tensor out = Tensor::zeros({g.dims[0], g.dims[1]});
    for (size_t k = 0; k < m.bits.size(); ++k)
        out.data[k] = complement ? 1.0 - m.bits[k] : static_cast<double>(m.bits[k]);
    return out;
}

std::vector<int> patch_map(const MixerConfig& c) {
    const int P = c.patch_size, W = c.width, wp = c.width / P;
    std::vector<int> idx(static_cast<size_t>(c.patches()) * P * P);
    for (int p = 0; p < c.patches(); ++p) {
        const int pi = p / wp, pj = p % wp;
        for (int ci = 0; ci < P; ++ci)
            for (int cj = 0; cj < P; ++cj)
                idx[static_cast<size_t>(p) * P * P + ci * P + cj] =
                    (pi * P + ci) * W + (pj * P + cj);
    }
    return idx;
}

std::vector<int> unpatch_map(const MixerConfig& c) {
    const int P = c.patch_size, H = c.height, W = c.width, wp = c.width / P;
    std::vector<int> idx(static_cast<size_t>(H) * W * 2);
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j)
            for (int ch = 0; ch < 2; ++ch) {
                const int p = (i / P) * wp + (j / P);
                const int cell = (i % P) * P + (j % P);
                idx[(static_cast<size_t>(i) * W + j) * 2 + ch] = p * (2 * P * P) + cell * 2 + ch;
            }
    return idx;
}

/// Base linear + optional LoRA adapter. With a hardware context, the base
/// path sees DAC-quantized inputs and ADC-quantized matmul outputs; the
/// LoRA path stays digital and exact. Bias is applied digitally.
NodeId linear(Tape& tape, const BoundWeights& bw, NodeId x2d, NodeId w, NodeId b,
              NodeId lora_a = -1, NodeId lora_b = -1) {
    NodeId xin = x2d;
    if (bw.hw && bw.hw->dac_bits >= 2) xin = tape.quantize_symmetric(xin, bw.hw->dac_bits);
    NodeId base = tape.matmul(xin, w);
    if (bw.hw && bw.hw->adc_bits >= 2) base = tape.quantize_symmetric(base, bw.hw->adc_bits);
    NodeId out = tape.add(base, b);
    if (lora_a >= 0) out = tape.add(out, tape.matmul(tape.matmul(x2d, lora_a), lora_b));
    return out;
}

void check_s2_range(const Tensor& s2) {
    for (double v : s2.data)
        if (std::abs(v) > 700.0)
            throw NumericRangeError("coupling scale |s2| exceeds 700");
}

} // namespace

void MixerConfig::validate() const {
    if (height < 1 || width < 1) throw ConfigError("mixer: lattice extents must be >= 1");
    if (patch_size < 1 || height % patch_size != 0 || width % patch_size != 0)
        throw ConfigError("mixer: patch size must divide both lattice extents");
    if (channels < 1 || mixer_blocks < 1 || token_hidden < 1 || channel_hidden < 1)
        throw ConfigError("mixer: widths must be positive");
    if (timesteps < 2 || timesteps % 2 != 0)
        throw ConfigError("mixer: timesteps must be even and >= 2");
    if (lora_rank < 1) throw ConfigError("mixer: lora rank must be >= 1");
    const int s = patches();
    const int min_dim = std::min({s, token_hidden, channels, channel_hidden});
    if (lora_rank > min_dim)
        throw ConfigError("mixer: lora rank exceeds the smallest adapted layer dimension");
}

std::vector<FlowWeights::TensorRef> FlowWeights::tensors() {
    std::vector<TensorRef> out;
    auto push = [&](const std::string& n, Tensor& t, Partition p, bool train = true) {
        out.push_back(TensorRef{n, &t, p, train});
    };
    push("patch_embed.weight", patch_w, Partition::analog);
    push("patch_embed.bias", patch_b, Partition::analog);
    push("time_embed", time_embed, Partition::digital);
    for (size_t k = 0; k < blocks.size(); ++k) {
        const std::string p = "block" + std::to_string(k) + ".";
        MixerBlockWeights& b = blocks[k];
        push(p + "token.norm.gamma", b.tn_gamma, Partition::digital);
        push(p + "token.norm.beta", b.tn_beta, Partition::digital);
        push(p + "token.norm.running_mean", b.tn_state.running_mean, Partition::digital, false);
        push(p + "token.norm.running_var", b.tn_state.running_var, Partition::digital, false);
        push(p + "token.w1", b.w1, Partition::analog);
        push(p + "token.b1", b.b1, Partition::analog);
        push(p + "token.w1.lora_a", b.l1.a, Partition::digital);
        push(p + "token.w1.lora_b", b.l1.b, Partition::digital);
        push(p + "token.w2", b.w2, Partition::analog);
        push(p + "token.b2", b.b2, Partition::analog);
        push(p + "token.w2.lora_a", b.l2.a, Partition::digital);
        push(p + "token.w2.lora_b", b.l2.b, Partition::digital);
        push(p + "channel.norm.gamma", b.cn_gamma, Partition::digital);
        push(p + "channel.norm.beta", b.cn_beta, Partition::digital);
        push(p + "channel.norm.running_mean", b.cn_state.running_mean, Partition::digital, false);
        push(p + "channel.norm.running_var", b.cn_state.running_var, Partition::digital, false);
        push(p + "channel.w3", b.w3, Partition::analog);
        push(p + "channel.b3", b.b3, Partition::analog);
        push(p + "channel.w3.lora_a", b.l3.a, Partition::digital);
        push(p + "channel.w3.lora_b", b.l3.b, Partition::digital);
        push(p + "channel.w4", b.w4, Partition::analog);
        push(p + "channel.b4", b.b4, Partition::analog);
        push(p + "channel.w4.lora_a", b.l4.a, Partition::digital);
        push(p + "channel.w4.lora_b", b.l4.b, Partition::digital);
    }
    push("out_embed.weight", out_w, Partition::analog);
    push("out_embed.bias", out_b, Partition::analog);
    push("pixel_fc.weight", px_w, Partition::analog);
    push("pixel_fc.bias", px_b, Partition::analog);
    return out;
}

FlowWeights init_flow_weights(const MixerConfig& cfg, uint64_t seed) {
    cfg.validate();
    Rng rng(derive_seed(seed, 0xf10f));
    const int P2 = cfg.patch_size * cfg.patch_size;
    const int s = cfg.patches(), C = cfg.channels, Ds = cfg.token_hidden, Dc = cfg.channel_hidden;
    const int r = cfg.lora_rank;

    auto he = [&](int fan_in, const Shape& sh) {
        return gaussian_tensor(sh, rng, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    };

    FlowWeights w;
    w.config = cfg;
    w.patch_w = he(P2, {P2, C});
    w.patch_b = Tensor::zeros({C});
    w.time_embed = gaussian_tensor({cfg.timesteps, C}, rng, 0.02);
    for (int k = 0; k < cfg.mixer_blocks; ++k) {
        MixerBlockWeights b;
        b.tn_gamma = Tensor::full({C}, 1.0);
        b.tn_beta = Tensor::zeros({C});
        b.tn_state = BatchNormState::init(C, cfg.timesteps);
        b.w1 = he(s, {s, Ds});
        b.b1 = Tensor::zeros({Ds});
        b.w2 = he(Ds, {Ds, s});
        b.b2 = Tensor::zeros({s});
        b.l1 = LoraPair{gaussian_tensor({s, r}, rng, 0.02), Tensor::zeros({r, Ds})};
        b.l2 = LoraPair{gaussian_tensor({Ds, r}, rng, 0.02), Tensor::zeros({r, s})};
        b.cn_gamma = Tensor::full({C}, 1.0);
        b.cn_beta = Tensor::zeros({C});
        b.cn_state = BatchNormState::init(C, cfg.timesteps);
        b.w3 = he(C, {C, Dc});
        b.b3 = Tensor::zeros({Dc});
        b.w4 = he(Dc, {Dc, C});
        b.b4 = Tensor::zeros({C});
        b.l3 = LoraPair{gaussian_tensor({C, r}, rng, 0.02), Tensor::zeros({r, Dc})};
        b.l4 = LoraPair{gaussian_tensor({Dc, r}, rng, 0.02), Tensor::zeros({r, C})};
        w.blocks.push_back(std::move(b));
    }
    w.out_w = he(C, {C, 2 * P2});
    w.out_b = Tensor::zeros({2 * P2});
    // zero regression head: the flow starts as the identity map
    w.px_w = Tensor::zeros({2, 2});
    w.px_b = Tensor::zeros({2});
    return w;
}

BoundWeights bind_weights(Tape& tape, FlowWeights& w, Mode mode, const HardwareContext* hw) {
    w.config.validate();
    BoundWeights bw;
    bw.weights = &w;
    bw.mode = mode;
    bw.hw = hw;
    for (auto& ref : w.tensors()) {
        const NodeId id = ref.trainable ? tape.leaf(*ref.tensor) : tape.constant(*ref.tensor);
        bw.params.push_back(BoundParam{ref.name, id, ref.tensor, ref.partition, ref.trainable});
    }
    auto find = [&](const std::string& n) {
        for (const auto& p : bw.params)
            if (p.name == n) return p.node;
        throw ConfigError("bind_weights: missing tensor " + n);
    };
    bw.patch_w = find("patch_embed.weight");
    bw.patch_b = find("patch_embed.bias");
    bw.time_embed = find("time_embed");
    bw.out_w = find("out_embed.weight");
    bw.out_b = find("out_embed.bias");
    bw.px_w = find("pixel_fc.weight");
    bw.px_b = find("pixel_fc.bias");
    for (size_t k = 0; k < w.blocks.size(); ++k) {
        const std::string p = "block" + std::to_string(k) + ".";
        BoundWeights::Block b;
        b.tn_gamma = find(p + "token.norm.gamma");
        b.tn_beta = find(p + "token.norm.beta");
        b.w1 = find(p + "token.w1");
        b.b1 = find(p + "token.b1");
        b.l1a = find(p + "token.w1.lora_a");
        b.l1b = find(p + "token.w1.lora_b");
        b.w2 = find(p + "token.w2");
        b.b2 = find(p + "token.b2");
        b.l2a = find(p + "token.w2.lora_a");
        b.l2b = find(p + "token.w2.lora_b");
        b.cn_gamma = find(p + "channel.norm.gamma");
        b.cn_beta = find(p + "channel.norm.beta");
        b.w3 = find(p + "channel.w3");
        b.b3 = find(p + "channel.b3");
        b.l3a = find(p + "channel.w3.lora_a");
        b.l3b = find(p + "channel.w3.lora_b");
        b.w4 = find(p + "channel.w4");
        b.b4 = find(p + "channel.b4");
        b.l4a = find(p + "channel.w4.lora_a");
        b.l4b = find(p + "channel.w4.lora_b");
        bw.blocks.push_back(b);
    }
    return bw;
}

std::pair<NodeId, NodeId> mixer_forward_node(Tape& tape, BoundWeights& bw, NodeId x_a, int t) {
    const MixerConfig& c = bw.weights->config;
    if (t < 0 || t >= c.timesteps) throw InvalidInputError("mixer_forward: timestep out of range");
    const Tensor& tx = tape.value(x_a);
    if (tx.shape.size() != 3 || tx.shape[1] != c.height || tx.shape[2] != c.width)
        throw ShapeError("mixer_forward: input must be (B, H, W) matching the config");
    const int B = tx.shape[0];
    const int s = c.patches(), C = c.channels, P2 = c.patch_size * c.patch_size;

    // patch embedding (Eq. 13 style strided linear map)
    NodeId patches = tape.gather_per_sample(x_a, patch_map(c), {s, P2});
    NodeId x2d = linear(tape, bw, tape.reshape(patches, {B * s, P2}), bw.patch_w, bw.patch_b);

    NodeId e_t = tape.slice_row(bw.time_embed, t);
    for (size_t k = 0; k < bw.blocks.size(); ++k) {
        const BoundWeights::Block& blk = bw.blocks[k];
        MixerBlockWeights& bwk = bw.weights->blocks[k];

        // token mixing: exchange information across patches, per channel.
        // The timestep embedding rides on the normalized activations; a
        // shift in front of the normalization would be absorbed by the
        // batch statistics. Statistics rows are kept per timestep because
        // the shared weights see a different activation distribution at
        // each t.
        NodeId xn = tape.batchnorm(x2d, blk.tn_gamma, blk.tn_beta, bwk.tn_state, bw.mode, t);
        NodeId xe = tape.add(xn, e_t);
        NodeId tok = tape.reshape(tape.swap_last2(tape.reshape(xe, {B, s, C})), {B * C, s});
        NodeId h1 = tape.relu(linear(tape, bw, tok, blk.w1, blk.b1, blk.l1a, blk.l1b));
        NodeId t2 = linear(tape, bw, h1, blk.w2, blk.b2, blk.l2a, blk.l2b);
        NodeId tok_out = tape.reshape(tape.swap_last2(tape.reshape(t2, {B, C, s})), {B * s, C});
        NodeId u = tape.add(x2d, tok_out);

        // channel mixing: exchange information across channels, per patch
        NodeId un = tape.batchnorm(u, blk.cn_gamma, blk.cn_beta, bwk.cn_state, bw.mode, t);
        NodeId h3 = tape.relu(linear(tape, bw, un, blk.w3, blk.b3, blk.l3a, blk.l3b));
        NodeId z4 = linear(tape, bw, h3, blk.w4, blk.b4, blk.l4a, blk.l4b);
        x2d = tape.add(u, z4);
    }

    // output embedding back to (H, W, 2), then the shared per-pixel map
    NodeId emb = linear(tape, bw, x2d, bw.out_w, bw.out_b); // (B*s, 2 P^2)
    NodeId grid = tape.gather_per_sample(tape.reshape(emb, {B, s * 2 * P2}), unpatch_map(c),
                                         {c.height, c.width, 2});
    NodeId px = linear(tape, bw, tape.reshape(grid, {B * c.height * c.width, 2}), bw.px_w, bw.px_b);
    NodeId flat = tape.reshape(px, {B, c.height * c.width * 2});

    std::vector<int> i1(static_cast<size_t>(c.height) * c.width), i2 = i1;
    for (size_t kk = 0; kk < i1.size(); ++kk) {
        i1[kk] = static_cast<int>(2 * kk);
        i2[kk] = static_cast<int>(2 * kk + 1);
    }
    NodeId s1 = tape.gather_per_sample(flat, i1, {c.height, c.width});
    NodeId s2 = tape.gather_per_sample(flat, i2, {c.height, c.width});

    // zero the frozen sites so the coupling update leaves them untouched
    const Tensor om = mask_tensor(c.geometry(), t, /*complement=*/true);
    return {tape.mask_apply(s1, om), tape.mask_apply(s2, om)};
}

CouplingStep coupling_inverse_node(Tape& tape, BoundWeights& bw, NodeId x, int t) {
    const MixerConfig& c = bw.weights->config;
    const Tensor m = mask_tensor(c.geometry(), t, false);
    const Tensor om = mask_tensor(c.geometry(), t, true);
    NodeId x_a = tape.mask_apply(x, m);
    auto [s1, s2] = mixer_forward_node(tape, bw, x_a, t);
    check_s2_range(tape.value(s2));
    NodeId x_b = tape.mask_apply(x, om);
    NodeId next = tape.add(tape.mul(tape.sub(x_b, s1), tape.exp(tape.neg(s2))), x_a);
    return CouplingStep{next, tape.sum_per_sample(s2)};
}

CouplingStep coupling_forward_node(Tape& tape, BoundWeights& bw, NodeId x_next, int t) {
    const MixerConfig& c = bw.weights->config;
    const Tensor m = mask_tensor(c.geometry(), t, false);
    const Tensor om = mask_tensor(c.geometry(), t, true);
    NodeId x_a = tape.mask_apply(x_next, m);
    auto [s1, s2] = mixer_forward_node(tape, bw, x_a, t);
    check_s2_range(tape.value(s2));
    NodeId x_b = tape.add(tape.mul(tape.mask_apply(x_next, om), tape.exp(s2)), s1);
    return CouplingStep{tape.add(x_b, x_a), tape.sum_per_sample(s2)};
}

FlowForward flow_forward(Tape& tape, BoundWeights& bw, const Tensor& prior) {
    const MixerConfig& c = bw.weights->config;
    if (prior.shape.size() != 3 || prior.shape[1] != c.height || prior.shape[2] != c.width)
        throw ShapeError("flow_forward: prior must be (B, H, W)");
    const int B = prior.shape[0];
    const int V = c.height * c.width;

    FlowForward ff;
    ff.prior = prior;
    ff.log_r.resize(static_cast<size_t>(B));
    Tensor log_r = Tensor::zeros({B});
    for (int b = 0; b < B; ++b) {
        double ss = 0.0;
        for (int k = 0; k < V; ++k) {
            const double v = prior.data[static_cast<size_t>(b) * V + k];
            ss += v * v;
        }
        ff.log_r[static_cast<size_t>(b)] = -0.5 * ss - 0.5 * V * std::log(2.0 * M_PI);
        log_r.data[static_cast<size_t>(b)] = ff.log_r[static_cast<size_t>(b)];
    }

    NodeId x = tape.constant(prior);
    NodeId log_q = tape.constant(log_r);
    for (int t = 0; t < c.timesteps; ++t) {
        CouplingStep step = coupling_inverse_node(tape, bw, x, t);
        x = step.x;
        ff.logdets.push_back(step.logdet);
        log_q = tape.add(log_q, step.logdet);
    }
    ff.phi = x;
    ff.log_q = log_q;
    return ff;
}

ConditionerOutput mixer_forward(const FieldConfiguration& x_a, int t, FlowWeights& w, Mode mode,
                                const HardwareContext* hw) {
    x_a.validate();
    const MixerConfig& c = w.config;
    if (x_a.geometry.dims[0] != c.height || x_a.geometry.dims[1] != c.width)
        throw ShapeError("mixer_forward: field geometry does not match the flow config");
    Tape tape;
    BoundWeights bw = bind_weights(tape, w, mode, hw);
    NodeId in = tape.constant(Tensor({1, c.height, c.width}, x_a.values));
    auto [s1, s2] = mixer_forward_node(tape, bw, in, t);
    Tensor v1 = tape.value(s1), v2 = tape.value(s2);
    v1.shape = {c.height, c.width};
    v2.shape = {c.height, c.width};
    return ConditionerOutput{std::move(v1), std::move(v2)};
}

namespace {

std::pair<Tensor, double> coupling_apply(const Tensor& x, int t, FlowWeights& w,
                                         const HardwareContext* hw, bool inverse) {
    const MixerConfig& c = w.config;
    if (shape_numel(x.shape) != c.height * c.width)
        throw ShapeError("coupling: field size does not match the flow config");
    if (!x.all_finite()) throw InvalidInputError("coupling: non-finite field value");
    Tape tape;
    BoundWeights bw = bind_weights(tape, w, Mode::inference, hw);
    NodeId in = tape.constant(Tensor({1, c.height, c.width}, x.data));
    const CouplingStep step = inverse ? coupling_inverse_node(tape, bw, in, t)
                                      : coupling_forward_node(tape, bw, in, t);
    Tensor out = tape.value(step.x);
    out.shape = {c.height, c.width};
    return {std::move(out), tape.value(step.logdet).data[0]};
}

} // namespace

std::pair<Tensor, double> coupling_inverse(const Tensor& x, int t, FlowWeights& w,
                                           const HardwareContext* hw) {
    return coupling_apply(x, t, w, hw, true);
}

std::pair<Tensor, double> coupling_forward(const Tensor& x_next, int t, FlowWeights& w,
                                           const HardwareContext* hw) {
    return coupling_apply(x_next, t, w, hw, false);
}

std::vector<FlowSampleRecord> flow_sample(FlowWeights& w, int n, uint64_t seed,
                                          const HardwareContext* hw, int chunk) {
    if (n < 1) throw InvalidInputError("flow_sample: n must be >= 1");
    if (chunk < 1) chunk = 1;
    const MixerConfig& c = w.config;
    const int V = c.height * c.width;

    // one sequential prior stream so the chunk size never changes results
    Rng rng(derive_seed(seed, 0x5a11));
    std::vector<double> all(static_cast<size_t>(n) * V);
    for (double& v : all) v = rng.gaussian();

    std::vector<FlowSampleRecord> records;
    records.reserve(static_cast<size_t>(n));
    for (int start = 0; start < n; start += chunk) {
        const int B = std::min(chunk, n - start);
        Tensor prior({B, c.height, c.width},
                     std::vector<double>(all.begin() + static_cast<size_t>(start) * V,
                                         all.begin() + (static_cast<size_t>(start) + B) * V));
        Tape tape;
        BoundWeights bw = bind_weights(tape, w, Mode::inference, hw);
        FlowForward ff = flow_forward(tape, bw, prior);
        const Tensor& phi = tape.value(ff.phi);
        const Tensor& log_q = tape.value(ff.log_q);
        for (int b = 0; b < B; ++b) {
            FlowSampleRecord rec;
            rec.prior = Tensor({c.height, c.width},
                               std::vector<double>(prior.data.begin() + static_cast<size_t>(b) * V,
                                                   prior.data.begin() + (static_cast<size_t>(b) + 1) * V));
            rec.config.geometry = c.geometry();
            rec.config.values.assign(phi.data.begin() + static_cast<size_t>(b) * V,
                                     phi.data.begin() + (static_cast<size_t>(b) + 1) * V);
            rec.log_r = ff.log_r[static_cast<size_t>(b)];
            rec.log_q = log_q.data[static_cast<size_t>(b)];
            for (NodeId ld : ff.logdets)
                rec.layer_logdets.push_back(tape.value(ld).data[static_cast<size_t>(b)]);
            records.push_back(std::move(rec));
        }
    }
    return records;
}

// ---------------------------------------------------------------------------
// Accounting
// ---------------------------------------------------------------------------

std::vector<LayerProfile> layer_profiles(const MixerConfig& c) {
    c.validate();
    const int64_t T = c.timesteps;
    const int64_t s = c.patches(), C = c.channels, Ds = c.token_hidden, Dc = c.channel_hidden;
    const int64_t P2 = static_cast<int64_t>(c.patch_size) * c.patch_size;
    const int64_t r = c.lora_rank;
    const int64_t V = static_cast<int64_t>(c.height) * c.width;

    std::vector<LayerProfile> out;
    out.push_back({"patch_embed", T * s * P2 * C, 0, {{static_cast<int>(P2), static_cast<int>(C), T * s}}});
    for (int k = 0; k < c.mixer_blocks; ++k) {
        const std::string p = "block" + std::to_string(k) + ".";
        // batchnorm: 2 MACs per element (normalize + affine); time-embed adds are free
        out.push_back({p + "token.norm", 0, T * 2 * s * C, {}});
        out.push_back({p + "token.mlp", T * 2 * C * s * Ds, T * 2 * C * r * (s + Ds),
                       {{static_cast<int>(s), static_cast<int>(Ds), T * C},
                        {static_cast<int>(Ds), static_cast<int>(s), T * C}}});
        out.push_back({p + "channel.norm", 0, T * 2 * s * C, {}});
        out.push_back({p + "channel.mlp", T * 2 * s * C * Dc, T * 2 * s * r * (C + Dc),
                       {{static_cast<int>(C), static_cast<int>(Dc), T * s},
                        {static_cast<int>(Dc), static_cast<int>(C), T * s}}});
    }
    out.push_back({"out_embed", T * s * C * 2 * P2, 0,
                   {{static_cast<int>(C), static_cast<int>(2 * P2), T * s}}});
    out.push_back({"pixel_fc", T * V * 2 * 2, 0, {{2, 2, T * V}}});
    // the x^t -> x^{t+1} update runs on the digital side: one multiply per site
    out.push_back({"coupling_update", 0, T * V, {}});
    return out;
}

MacCounts count_params_and_macs(const MixerConfig& c) {
    c.validate();
    const int64_t s = c.patches(), C = c.channels, Ds = c.token_hidden, Dc = c.channel_hidden;
    const int64_t P2 = static_cast<int64_t>(c.patch_size) * c.patch_size;
    const int64_t r = c.lora_rank;

    MacCounts mc;
    mc.analog_params = P2 * C + C                       // patch embedding
                     + c.mixer_blocks * (s * Ds + Ds + Ds * s + s + C * Dc + Dc + Dc * C + C)
                     + C * 2 * P2 + 2 * P2              // output embedding
                     + 2 * 2 + 2;                       // per-pixel regression
    mc.digital_params = static_cast<int64_t>(c.timesteps) * C // time embeddings
                      + c.mixer_blocks * (4 * C)         // batchnorm gamma/beta (x2 norms)
                      + c.mixer_blocks * r * ((s + Ds) + (Ds + s) + (C + Dc) + (Dc + C));
    for (const auto& lp : layer_profiles(c)) {
        mc.analog_macs += lp.analog_macs;
        mc.digital_macs += lp.digital_macs;
    }
    return mc;
}

} // namespace lft
