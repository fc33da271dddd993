#include "lft/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace lft {

namespace {

using nlohmann::json;

// -- schema ------------------------------------------------------------

struct KeySpec {
    const char* name;
    json::value_t type; // number_integer means "any number" for our purposes
};

void check_keys(const json& obj, const std::string& path, const std::vector<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError("config: " + path + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError("config: unknown key '" + path + "." + it.key() + "'");
    }
}

double num(const json& obj, const std::string& path, const char* key, double dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError("config: '" + path + "." + key + "' must be a number");
    return v.get<double>();
}

int64_t integer(const json& obj, const std::string& path, const char* key, int64_t dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw ConfigError("config: '" + path + "." + key + "' must be an integer");
    return v.get<int64_t>();
}

std::string str(const json& obj, const std::string& path, const char* key, const std::string& dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_string()) throw ConfigError("config: '" + path + "." + key + "' must be a string");
    return v.get<std::string>();
}

// -- little-endian binary helpers ---------------------------------------

void put_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    put_bytes(os, b, 4);
}

void put_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    put_bytes(os, b, 8);
}

void put_f64(std::ostream& os, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

struct Reader {
    const std::vector<unsigned char>& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw IoError("file truncated");
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        const uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
};

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

json parse_trailer(const std::vector<unsigned char>& buf, size_t body_end_min) {
    if (buf.size() < body_end_min + 8) throw IoError("file truncated (no trailer length)");
    uint64_t len = 0;
    for (int i = 0; i < 8; ++i)
        len |= static_cast<uint64_t>(buf[buf.size() - 8 + i]) << (8 * i);
    if (len + 8 > buf.size()) throw IoError("trailer length exceeds file size");
    const size_t start = buf.size() - 8 - static_cast<size_t>(len);
    try {
        return json::parse(buf.begin() + static_cast<std::ptrdiff_t>(start), buf.end() - 8);
    } catch (const json::parse_error& e) {
        throw IoError(std::string("trailer JSON parse failure: ") + e.what());
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

nlohmann::json mixer_config_to_json(const MixerConfig& c) {
    return json{{"patch_size", c.patch_size},       {"channels", c.channels},
                {"mixer_blocks", c.mixer_blocks},   {"token_hidden", c.token_hidden},
                {"channel_hidden", c.channel_hidden}, {"timesteps", c.timesteps},
                {"lora_rank", c.lora_rank},         {"height", c.height},
                {"width", c.width}};
}

MixerConfig mixer_config_from_json(const json& j) {
    MixerConfig c;
    const std::string path = "mixer_config";
    check_keys(j, path, {"patch_size", "channels", "mixer_blocks", "token_hidden", "channel_hidden",
                         "timesteps", "lora_rank", "height", "width"});
    c.patch_size = static_cast<int>(integer(j, path, "patch_size", c.patch_size));
    c.channels = static_cast<int>(integer(j, path, "channels", c.channels));
    c.mixer_blocks = static_cast<int>(integer(j, path, "mixer_blocks", c.mixer_blocks));
    c.token_hidden = static_cast<int>(integer(j, path, "token_hidden", c.token_hidden));
    c.channel_hidden = static_cast<int>(integer(j, path, "channel_hidden", c.channel_hidden));
    c.timesteps = static_cast<int>(integer(j, path, "timesteps", c.timesteps));
    c.lora_rank = static_cast<int>(integer(j, path, "lora_rank", c.lora_rank));
    c.height = static_cast<int>(integer(j, path, "height", c.height));
    c.width = static_cast<int>(integer(j, path, "width", c.width));
    return c;
}

RunConfig parse_run_config(const json& j) {
    RunConfig c;
    check_keys(j, "", {"lattice", "action", "flow", "train", "sampler", "hardware", "seed"});
    if (!j.contains("lattice") || !j.contains("action"))
        throw ConfigError("config: 'lattice' and 'action' are required");

    c.seed = static_cast<uint64_t>(integer(j, "", "seed", 0));

    {
        const json& l = j.at("lattice");
        check_keys(l, "lattice", {"dims"});
        if (!l.contains("dims") || !l.at("dims").is_array() || l.at("dims").size() != 2)
            throw ConfigError("config: 'lattice.dims' must be an array of 2 integers");
        c.lattice.dims[0] = l.at("dims")[0].get<int>();
        c.lattice.dims[1] = l.at("dims")[1].get<int>();
        c.lattice.validate();
    }
    {
        const json& a = j.at("action");
        check_keys(a, "action", {"kind", "params"});
        const std::string kind = str(a, "action", "kind", "phi4");
        const json params = a.contains("params") ? a.at("params") : json::object();
        if (kind == "phi4") {
            c.action_kind = ActionKind::phi4;
            check_keys(params, "action.params", {"m2", "lambda"});
            c.phi4.m2 = num(params, "action.params", "m2", c.phi4.m2);
            c.phi4.lambda = num(params, "action.params", "lambda", c.phi4.lambda);
            if (!(c.phi4.lambda > 0.0)) throw ConfigError("config: phi4 lambda must be > 0");
        } else if (kind == "graphene") {
            c.action_kind = ActionKind::graphene;
            check_keys(params, "action.params", {"g", "u", "mass_sign"});
            c.graphene.g = num(params, "action.params", "g", c.graphene.g);
            c.graphene.u = num(params, "action.params", "u", c.graphene.u);
            c.graphene.mass_sign =
                static_cast<int>(integer(params, "action.params", "mass_sign", c.graphene.mass_sign));
            if (!(c.graphene.g > 0.0)) throw ConfigError("config: graphene g must be > 0");
            if (c.graphene.mass_sign != 1 && c.graphene.mass_sign != -1)
                throw ConfigError("config: graphene mass_sign must be +1 or -1");
        } else {
            throw ConfigError("config: unknown action kind '" + kind + "'");
        }
    }
    {
        json f = j.contains("flow") ? j.at("flow") : json::object();
        check_keys(f, "flow", {"patch_size", "channels", "mixer_blocks", "token_hidden",
                               "channel_hidden", "timesteps", "lora_rank"});
        f["height"] = c.lattice.dims[0];
        f["width"] = c.lattice.dims[1];
        c.flow = mixer_config_from_json(f);
        // 1x1 desk lattices force a unit patch; anything else must divide
        if (c.flow.height % c.flow.patch_size != 0 || c.flow.width % c.flow.patch_size != 0)
            throw ConfigError("config: flow.patch_size must divide both lattice extents");
        c.flow.validate();
    }
    {
        const json t = j.contains("train") ? j.at("train") : json::object();
        check_keys(t, "train", {"batch_size", "steps", "learning_rate", "beta1", "beta2", "seed",
                                "ess_target", "mode", "eval_every", "eval_batch"});
        c.train.batch_size = static_cast<int>(integer(t, "train", "batch_size", c.train.batch_size));
        c.train.steps = static_cast<int>(integer(t, "train", "steps", c.train.steps));
        c.train.learning_rate = num(t, "train", "learning_rate", c.train.learning_rate);
        c.train.beta1 = num(t, "train", "beta1", c.train.beta1);
        c.train.beta2 = num(t, "train", "beta2", c.train.beta2);
        c.train.seed = static_cast<uint64_t>(integer(t, "train", "seed", static_cast<int64_t>(c.seed)));
        c.train.ess_target = num(t, "train", "ess_target", c.train.ess_target);
        c.train.eval_every = static_cast<int>(integer(t, "train", "eval_every", c.train.eval_every));
        c.train.eval_batch = static_cast<int>(integer(t, "train", "eval_batch", c.train.eval_batch));
        const std::string mode = str(t, "train", "mode", "full");
        if (mode == "full")
            c.train.mode = TrainMode::full;
        else if (mode == "lora_only")
            c.train.mode = TrainMode::lora_only;
        else
            throw ConfigError("config: train.mode must be 'full' or 'lora_only'");
        c.train.validate();
    }
    {
        const json s = j.contains("sampler") ? j.at("sampler") : json::object();
        check_keys(s, "sampler", {"kind", "step_size", "n_leapfrog", "n_samples", "burn_in", "thin",
                                  "seed", "auto_tune"});
        c.hmc.step_size = num(s, "sampler", "step_size", c.hmc.step_size);
        c.hmc.n_leapfrog = static_cast<int>(integer(s, "sampler", "n_leapfrog", c.hmc.n_leapfrog));
        c.hmc.n_samples = static_cast<int>(integer(s, "sampler", "n_samples", c.hmc.n_samples));
        c.hmc.burn_in = static_cast<int>(integer(s, "sampler", "burn_in", c.hmc.burn_in));
        c.hmc.thin = static_cast<int>(integer(s, "sampler", "thin", c.hmc.thin));
        c.hmc.seed = static_cast<uint64_t>(integer(s, "sampler", "seed", static_cast<int64_t>(c.seed)));
        if (s.contains("auto_tune")) c.hmc.auto_tune = s.at("auto_tune").get<bool>();
        c.sample_n = c.hmc.n_samples;
        c.hmc.validate();
    }
    {
        const json h = j.contains("hardware") ? j.at("hardware") : json::object();
        check_keys(h, "hardware", {"conductance", "noise", "cost"});
        const json cm = h.contains("conductance") ? h.at("conductance") : json::object();
        check_keys(cm, "hardware.conductance",
                   {"g_min_uS", "g_max_uS", "v_min", "v_max", "g_ref_uS", "dac_bits", "adc_bits"});
        c.conductance.g_min_uS = num(cm, "hardware.conductance", "g_min_uS", c.conductance.g_min_uS);
        c.conductance.g_max_uS = num(cm, "hardware.conductance", "g_max_uS", c.conductance.g_max_uS);
        c.conductance.v_min = num(cm, "hardware.conductance", "v_min", c.conductance.v_min);
        c.conductance.v_max = num(cm, "hardware.conductance", "v_max", c.conductance.v_max);
        c.conductance.g_ref_uS = num(cm, "hardware.conductance", "g_ref_uS", c.conductance.g_ref_uS);
        c.conductance.dac_bits =
            static_cast<int>(integer(cm, "hardware.conductance", "dac_bits", c.conductance.dac_bits));
        c.conductance.adc_bits =
            static_cast<int>(integer(cm, "hardware.conductance", "adc_bits", c.conductance.adc_bits));
        c.conductance.validate();

        const json nm = h.contains("noise") ? h.at("noise") : json::object();
        check_keys(nm, "hardware.noise", {"sigma_uS", "seed"});
        c.noise.sigma_uS = num(nm, "hardware.noise", "sigma_uS", c.noise.sigma_uS);
        c.noise.seed =
            static_cast<uint64_t>(integer(nm, "hardware.noise", "seed", static_cast<int64_t>(c.seed)));

        const json co = h.contains("cost") ? h.at("cost") : json::object();
        check_keys(co, "hardware.cost",
                   {"e_digital_mac_J", "e_cell_J", "e_dac_J", "e_tia_J", "e_adc_J",
                    "analog_tflops_mm2", "digital_tflops_mm2", "area_mm2", "flops_per_mac",
                    "array_size"});
        c.cost.e_digital_mac_J = num(co, "hardware.cost", "e_digital_mac_J", c.cost.e_digital_mac_J);
        c.cost.e_cell_J = num(co, "hardware.cost", "e_cell_J", c.cost.e_cell_J);
        c.cost.e_dac_J = num(co, "hardware.cost", "e_dac_J", c.cost.e_dac_J);
        c.cost.e_tia_J = num(co, "hardware.cost", "e_tia_J", c.cost.e_tia_J);
        c.cost.e_adc_J = num(co, "hardware.cost", "e_adc_J", c.cost.e_adc_J);
        c.cost.analog_tflops_mm2 =
            num(co, "hardware.cost", "analog_tflops_mm2", c.cost.analog_tflops_mm2);
        c.cost.digital_tflops_mm2 =
            num(co, "hardware.cost", "digital_tflops_mm2", c.cost.digital_tflops_mm2);
        c.cost.area_mm2 = num(co, "hardware.cost", "area_mm2", c.cost.area_mm2);
        c.cost.flops_per_mac =
            static_cast<int>(integer(co, "hardware.cost", "flops_per_mac", c.cost.flops_per_mac));
        c.cost.array_size =
            static_cast<int>(integer(co, "hardware.cost", "array_size", c.cost.array_size));
        c.cost.validate();
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse failure in " + path + ": " + e.what());
    }
    return parse_run_config(j);
}

nlohmann::json run_config_to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["lattice"] = {{"dims", {c.lattice.dims[0], c.lattice.dims[1]}}};
    if (c.action_kind == ActionKind::phi4)
        j["action"] = {{"kind", "phi4"}, {"params", {{"m2", c.phi4.m2}, {"lambda", c.phi4.lambda}}}};
    else
        j["action"] = {{"kind", "graphene"},
                       {"params",
                        {{"g", c.graphene.g}, {"u", c.graphene.u}, {"mass_sign", c.graphene.mass_sign}}}};
    json f = mixer_config_to_json(c.flow);
    f.erase("height");
    f.erase("width");
    j["flow"] = f;
    j["train"] = {{"batch_size", c.train.batch_size},
                  {"steps", c.train.steps},
                  {"learning_rate", c.train.learning_rate},
                  {"beta1", c.train.beta1},
                  {"beta2", c.train.beta2},
                  {"seed", c.train.seed},
                  {"ess_target", c.train.ess_target},
                  {"mode", c.train.mode == TrainMode::full ? "full" : "lora_only"},
                  {"eval_every", c.train.eval_every},
                  {"eval_batch", c.train.eval_batch}};
    j["sampler"] = {{"step_size", c.hmc.step_size}, {"n_leapfrog", c.hmc.n_leapfrog},
                    {"n_samples", c.hmc.n_samples}, {"burn_in", c.hmc.burn_in},
                    {"thin", c.hmc.thin},           {"seed", c.hmc.seed},
                    {"auto_tune", c.hmc.auto_tune}};
    return j;
}

void apply_dotted_override(json& j, const std::string& spec) {
    const size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must look like path.to.key=value: " + spec);
    const std::string path = spec.substr(0, eq);
    const std::string raw = spec.substr(eq + 1);

    json value;
    try {
        size_t used = 0;
        const long long i = std::stoll(raw, &used);
        if (used == raw.size()) value = i;
    } catch (...) {
    }
    if (value.is_null()) {
        try {
            size_t used = 0;
            const double d = std::stod(raw, &used);
            if (used == raw.size()) value = d;
        } catch (...) {
        }
    }
    if (value.is_null()) {
        if (raw == "true")
            value = true;
        else if (raw == "false")
            value = false;
        else
            value = raw;
    }

    json* cur = &j;
    std::stringstream ss(path);
    std::string tok;
    std::vector<std::string> toks;
    while (std::getline(ss, tok, '.')) toks.push_back(tok);
    if (toks.empty()) throw ConfigError("override has an empty path: " + spec);
    for (size_t i = 0; i + 1 < toks.size(); ++i) cur = &(*cur)[toks[i]];
    (*cur)[toks.back()] = value;
}

// ---------------------------------------------------------------------------
// LFTC
// ---------------------------------------------------------------------------

void write_ensemble(const std::string& path, const Ensemble& ens, const json& extra_meta) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os.write("LFTC", 4);
    put_u32(os, 1); // version
    put_u32(os, 2); // ndim
    put_u32(os, static_cast<uint32_t>(ens.geometry.dims[0]));
    put_u32(os, static_cast<uint32_t>(ens.geometry.dims[1]));
    put_u64(os, static_cast<uint64_t>(ens.configs.size()));
    for (const auto& c : ens.configs)
        for (double v : c.values) put_f64(os, v);

    json trailer;
    trailer["sampler"] = ens.sampler;
    trailer["seed"] = ens.seed;
    trailer["acceptance_rate"] = ens.acceptance_rate;
    json actions = json::array(), accepted = json::array(), proposal = json::array();
    json log_q = json::array();
    bool any_logq = false;
    for (const auto& e : ens.entries) {
        actions.push_back(e.action);
        accepted.push_back(e.accepted ? 1 : 0);
        proposal.push_back(e.proposal_index);
        if (e.has_log_q) {
            log_q.push_back(e.log_q);
            any_logq = true;
        } else {
            log_q.push_back(nullptr);
        }
    }
    trailer["action_values"] = std::move(actions);
    trailer["accepted"] = std::move(accepted);
    trailer["proposal_index"] = std::move(proposal);
    trailer["log_q"] = any_logq ? std::move(log_q) : json();
    trailer["meta"] = extra_meta;

    const std::string t = trailer.dump();
    os.write(t.data(), static_cast<std::streamsize>(t.size()));
    put_u64(os, static_cast<uint64_t>(t.size()));
    if (!os) throw IoError("write failure on " + path);
}

Ensemble read_ensemble(const std::string& path, json* meta) {
    const auto buf = slurp(path);
    Reader r{buf};
    if (r.bytes(4) != "LFTC") throw IoError(path + ": bad magic (expected LFTC)");
    const uint32_t version = r.u32();
    if (version != 1)
        throw IoError(path + ": unsupported LFTC version " + std::to_string(version));
    const uint32_t ndim = r.u32();
    if (ndim != 2) throw IoError(path + ": LFTC ndim must be 2");
    Ensemble ens;
    ens.geometry.dims[0] = static_cast<int>(r.u32());
    ens.geometry.dims[1] = static_cast<int>(r.u32());
    ens.geometry.validate();
    const uint64_t n = r.u64();
    const int V = ens.geometry.volume();
    for (uint64_t i = 0; i < n; ++i) {
        FieldConfiguration c = FieldConfiguration::zeros(ens.geometry);
        for (int k = 0; k < V; ++k) c.values[static_cast<size_t>(k)] = r.f64();
        ens.configs.push_back(std::move(c));
    }

    const json trailer = parse_trailer(buf, r.pos);
    ens.sampler = trailer.value("sampler", "");
    ens.seed = trailer.value("seed", 0ULL);
    ens.acceptance_rate = trailer.value("acceptance_rate", 0.0);
    const json& actions = trailer.at("action_values");
    const json& accepted = trailer.at("accepted");
    const json& proposal = trailer.at("proposal_index");
    const json& log_q = trailer.at("log_q");
    if (actions.size() != n) throw IoError(path + ": trailer arrays out of sync with configs");
    for (uint64_t i = 0; i < n; ++i) {
        EnsembleEntry e;
        e.action = actions[i].get<double>();
        e.accepted = accepted[i].get<int>() != 0;
        e.proposal_index = proposal[i].get<int64_t>();
        if (log_q.is_array() && !log_q[i].is_null()) {
            e.log_q = log_q[i].get<double>();
            e.has_log_q = true;
        }
        ens.entries.push_back(e);
    }
    if (meta) *meta = trailer.value("meta", json::object());
    return ens;
}

// ---------------------------------------------------------------------------
// LFTW
// ---------------------------------------------------------------------------

void write_checkpoint(const std::string& path, FlowWeights& w, const json& provenance) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    const auto refs = w.tensors();
    os.write("LFTW", 4);
    put_u32(os, 1); // version
    put_u32(os, static_cast<uint32_t>(refs.size()));
    for (const auto& ref : refs) {
        put_u32(os, static_cast<uint32_t>(ref.name.size()));
        os.write(ref.name.data(), static_cast<std::streamsize>(ref.name.size()));
        const unsigned char tag = ref.partition == Partition::analog ? 0 : 1;
        put_bytes(os, &tag, 1);
        put_u32(os, static_cast<uint32_t>(ref.tensor->shape.size()));
        for (int d : ref.tensor->shape) put_u32(os, static_cast<uint32_t>(d));
        for (double v : ref.tensor->data) put_f64(os, v);
    }
    json trailer;
    trailer["mixer_config"] = mixer_config_to_json(w.config);
    trailer["provenance"] = provenance;
    const std::string t = trailer.dump();
    os.write(t.data(), static_cast<std::streamsize>(t.size()));
    put_u64(os, static_cast<uint64_t>(t.size()));
    if (!os) throw IoError("write failure on " + path);
}

FlowWeights read_checkpoint(const std::string& path, json* provenance) {
    const auto buf = slurp(path);
    Reader r{buf};
    if (r.bytes(4) != "LFTW") throw IoError(path + ": bad magic (expected LFTW)");
    const uint32_t version = r.u32();
    if (version != 1)
        throw IoError(path + ": unsupported LFTW version " + std::to_string(version));
    const uint32_t n_tensors = r.u32();

    struct Loaded {
        uint8_t tag;
        Tensor tensor;
    };
    std::vector<std::pair<std::string, Loaded>> loaded;
    for (uint32_t i = 0; i < n_tensors; ++i) {
        const uint32_t name_len = r.u32();
        std::string name = r.bytes(name_len);
        const uint8_t tag = r.u8();
        const uint32_t rank = r.u32();
        Shape shape;
        for (uint32_t k = 0; k < rank; ++k) shape.push_back(static_cast<int>(r.u32()));
        Tensor t = Tensor::zeros(shape);
        for (auto& v : t.data) v = r.f64();
        loaded.emplace_back(std::move(name), Loaded{tag, std::move(t)});
    }

    const json trailer = parse_trailer(buf, r.pos);
    if (!trailer.contains("mixer_config")) throw IoError(path + ": trailer missing mixer_config");
    const MixerConfig cfg = mixer_config_from_json(trailer.at("mixer_config"));
    FlowWeights w = init_flow_weights(cfg, 0);

    for (auto& ref : w.tensors()) {
        auto it = std::find_if(loaded.begin(), loaded.end(),
                               [&](const auto& p) { return p.first == ref.name; });
        if (it == loaded.end()) throw IoError(path + ": checkpoint missing tensor " + ref.name);
        const uint8_t expect = ref.partition == Partition::analog ? 0 : 1;
        if (it->second.tag != expect)
            throw IoError(path + ": partition tag mismatch for " + ref.name);
        if (it->second.tensor.shape != ref.tensor->shape)
            throw IoError(path + ": shape mismatch for " + ref.name);
        *ref.tensor = std::move(it->second.tensor);
    }
    if (provenance) *provenance = trailer.value("provenance", json::object());
    return w;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += "\"\"";
        else out += ch;
    }
    out += "\"";
    return out;
}

} // namespace

std::string observable_csv(const std::vector<ObservableRow>& rows) {
    std::ostringstream os;
    os << "observable,value,error,n_configs,lattice,action_kind,params_json,seed\n";
    os.precision(17);
    for (const auto& r : rows) {
        os << r.observable << ',' << r.value << ',' << r.error << ',' << r.n_configs << ','
           << r.lattice << ',' << r.action_kind << ',' << csv_quote(r.params_json) << ',' << r.seed
           << '\n';
    }
    return os.str();
}

} // namespace lft
