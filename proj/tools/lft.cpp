// Command-line front end: train / finetune / hmc / sample / observe /
// hwsim / sweep over the lattice-flow library. JSON configs in, LFTW/LFTC
// binaries and CSV/JSON reports out.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include "lft/io.hpp"
#include "lft/observables.hpp"
#include "lft/rng.hpp"

using nlohmann::json;

namespace {

int max_threads() {
    if (const char* env = std::getenv("LFT_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw lft::ConfigError("cannot open config file " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw lft::ConfigError("config parse failure in " + path + ": " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw lft::IoError("cannot open " + path + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

json train_report_json(const lft::TrainReport& rep) {
    return json{{"loss", rep.loss},
                {"ess", rep.ess},
                {"final_ess", rep.final_ess},
                {"steps_run", rep.steps_run},
                {"wall_seconds", rep.wall_seconds}};
}

std::string lattice_str(const lft::LatticeGeometry& g) {
    return std::to_string(g.dims[0]) + "x" + std::to_string(g.dims[1]);
}

json action_params_json(const lft::RunConfig& cfg) {
    if (cfg.action_kind == lft::ActionKind::phi4)
        return json{{"m2", cfg.phi4.m2}, {"lambda", cfg.phi4.lambda}};
    return json{{"g", cfg.graphene.g}, {"u", cfg.graphene.u}, {"mass_sign", cfg.graphene.mass_sign}};
}

// run k seeded chains (thread-capped) and concatenate in chain order
lft::Ensemble run_chains(int k, const std::function<lft::Ensemble(uint64_t, uint64_t)>& make,
                         uint64_t base_seed, json& chain_meta) {
    std::vector<lft::Ensemble> parts(static_cast<size_t>(k));
    const int workers = std::min(k, max_threads());
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<size_t>(k));
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (int c = next++; c < k; c = next++) {
                try {
                    parts[static_cast<size_t>(c)] =
                        make(lft::derive_seed(base_seed, static_cast<uint64_t>(c)),
                             static_cast<uint64_t>(c));
                } catch (...) {
                    errors[static_cast<size_t>(c)] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    lft::Ensemble all = std::move(parts.front());
    chain_meta = json::array();
    chain_meta.push_back({{"chain", 0}, {"seed", all.seed}, {"acceptance_rate", all.acceptance_rate}});
    for (int c = 1; c < k; ++c) {
        auto& p = parts[static_cast<size_t>(c)];
        chain_meta.push_back(
            {{"chain", c}, {"seed", p.seed}, {"acceptance_rate", p.acceptance_rate}});
        for (size_t i = 0; i < p.configs.size(); ++i) {
            all.configs.push_back(std::move(p.configs[i]));
            all.entries.push_back(p.entries[i]);
        }
    }
    all.seed = base_seed;
    return all;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& out, const std::string& report_path) {
    json doc = load_json(config_path);
    for (const auto& s : sets) lft::apply_dotted_override(doc, s);
    const lft::RunConfig cfg = lft::parse_run_config(doc);
    const lft::LatticeAction action = cfg.make_action();

    lft::FlowWeights w0 = lft::init_flow_weights(cfg.flow, cfg.seed);
    auto [w, rep] = lft::train(w0, action, cfg.train);

    json prov;
    prov["config"] = lft::run_config_to_json(cfg);
    prov["train_report"] = {{"final_ess", rep.final_ess}, {"steps_run", rep.steps_run}};
    lft::write_checkpoint(out, w, prov);
    std::cout << "trained " << rep.steps_run << " steps, final ESS " << rep.final_ess << "\n";
    if (!report_path.empty()) write_text(report_path, train_report_json(rep).dump(2));
    return 0;
}

int cmd_finetune(const std::string& ckpt, const std::vector<std::string>& sets,
                 const std::string& out, int steps_override) {
    json prov;
    lft::FlowWeights w = lft::read_checkpoint(ckpt, &prov);
    if (!prov.contains("config"))
        throw lft::ConfigError("checkpoint has no embedded config; cannot finetune");
    json doc = prov.at("config");
    for (const auto& s : sets) lft::apply_dotted_override(doc, s);
    const lft::RunConfig cfg = lft::parse_run_config(doc);

    lft::TrainHyper hyper = cfg.train;
    if (steps_override > 0) hyper.steps = steps_override;
    lft::TrainReport rep;
    lft::FlowWeights tuned = lft::finetune_lora(w, cfg.make_action(), hyper, &rep);

    json prov2;
    prov2["config"] = lft::run_config_to_json(cfg);
    prov2["train_report"] = {{"final_ess", rep.final_ess}, {"steps_run", rep.steps_run}};
    prov2["finetuned_from"] = ckpt;
    lft::write_checkpoint(out, tuned, prov2);
    std::cout << "finetuned " << rep.steps_run << " steps, final ESS " << rep.final_ess << "\n";
    return 0;
}

int cmd_hmc(const std::string& config_path, const std::vector<std::string>& sets, int n,
            const std::string& out, int chains) {
    json doc = load_json(config_path);
    for (const auto& s : sets) lft::apply_dotted_override(doc, s);
    const lft::RunConfig cfg = lft::parse_run_config(doc);
    const lft::LatticeAction action = cfg.make_action();

    lft::HmcParams params = cfg.hmc;
    if (n > 0) params.n_samples = n;

    json chain_meta;
    lft::Ensemble ens = run_chains(
        std::max(1, chains),
        [&](uint64_t seed, uint64_t stream) {
            lft::HmcParams p = params;
            p.seed = seed;
            lft::Rng init_rng(lft::derive_seed(seed, 0x1417 + stream));
            auto phi = lft::FieldConfiguration::zeros(cfg.lattice);
            for (double& v : phi.values) v = init_rng.gaussian();
            return lft::hmc_chain(phi, action, p);
        },
        params.seed, chain_meta);

    json meta;
    meta["action"] = {{"kind", cfg.action_kind == lft::ActionKind::phi4 ? "phi4" : "graphene"},
                      {"params", action_params_json(cfg)}};
    meta["chains"] = chain_meta;
    lft::write_ensemble(out, ens, meta);
    std::cout << "hmc wrote " << ens.size() << " configurations, acceptance "
              << ens.acceptance_rate << "\n";
    return 0;
}

int cmd_sample(const std::string& ckpt, const std::vector<std::string>& sets, int n,
               const std::string& out, int chains, int64_t seed_flag) {
    json prov;
    lft::FlowWeights w = lft::read_checkpoint(ckpt, &prov);
    if (!prov.contains("config"))
        throw lft::ConfigError("checkpoint has no embedded config; cannot sample");
    json doc = prov.at("config");
    for (const auto& s : sets) lft::apply_dotted_override(doc, s);
    const lft::RunConfig cfg = lft::parse_run_config(doc);
    const lft::LatticeAction action = cfg.make_action();
    const uint64_t base_seed = seed_flag >= 0 ? static_cast<uint64_t>(seed_flag) : cfg.seed;

    json chain_meta;
    lft::Ensemble ens = run_chains(
        std::max(1, chains),
        [&](uint64_t seed, uint64_t) {
            lft::FlowWeights local = w; // weights immutable during sampling
            return lft::propose_and_sample(local, action, n, seed);
        },
        base_seed, chain_meta);

    json meta;
    meta["action"] = {{"kind", cfg.action_kind == lft::ActionKind::phi4 ? "phi4" : "graphene"},
                      {"params", action_params_json(cfg)}};
    meta["chains"] = chain_meta;
    meta["checkpoint"] = ckpt;
    lft::write_ensemble(out, ens, meta);
    std::cout << "flow-mh wrote " << ens.size() << " configurations, acceptance "
              << ens.acceptance_rate << "\n";
    return 0;
}

int cmd_observe(const std::string& ens_path, const std::string& obs_list,
                const std::string& format, const std::string& out, int resamples) {
    json meta;
    const lft::Ensemble ens = lft::read_ensemble(ens_path, &meta);

    std::string kind = "unknown";
    json params = json::object();
    if (meta.contains("action")) {
        kind = meta["action"].value("kind", "unknown");
        params = meta["action"].value("params", json::object());
    }
    const double g_coupling = params.value("g", 1.0);
    const uint64_t seed = ens.seed;

    std::vector<std::string> names;
    {
        std::stringstream ss(obs_list);
        std::string tok;
        while (std::getline(ss, tok, ',')) names.push_back(tok);
    }

    std::vector<lft::ObservableRow> rows;
    auto push = [&](const std::string& name, double value, double error) {
        rows.push_back(lft::ObservableRow{name, value, error, static_cast<int64_t>(ens.size()),
                                          lattice_str(ens.geometry), kind, params.dump(), seed});
    };

    for (const auto& name : names) {
        if (name == "magnetization") {
            const auto m = lft::magnetization(ens);
            const auto [mv, me] = lft::bootstrap_mean_error(m.per_config, resamples, seed + 1);
            push("magnetization", m.mean, me);
            lft::Series absval;
            for (double v : m.per_config) absval.push_back(std::abs(v));
            const auto [av, ae] = lft::bootstrap_mean_error(absval, resamples, seed + 2);
            push("abs_magnetization", m.mean_abs, ae);
            (void)mv;
            (void)av;
        } else if (name == "phi2") {
            lft::Series phi2;
            for (const auto& c : ens.configs) {
                double s = 0.0;
                for (double v : c.values) s += v * v;
                phi2.push_back(s / c.values.size());
            }
            const auto [v, e] = lft::bootstrap_mean_error(phi2, resamples, seed + 3);
            push("phi2", v, e);
        } else if (name == "susceptibility") {
            const auto [v, e] = lft::bootstrap_observable(
                ens, [](const lft::Ensemble& s) { return lft::susceptibility(s); },
                std::min(resamples, 300), seed + 4);
            push("susceptibility", lft::susceptibility(ens), e);
            (void)v;
        } else if (name == "ising_energy") {
            const auto [v, e] = lft::bootstrap_observable(
                ens, [](const lft::Ensemble& s) { return lft::ising_energy(s); },
                std::min(resamples, 300), seed + 5);
            push("ising_energy", lft::ising_energy(ens), e);
            (void)v;
        } else if (name == "correlation_length") {
            const auto [v, e] = lft::bootstrap_observable(
                ens, [](const lft::Ensemble& s) { return lft::correlation_length(s).xi; },
                std::min(resamples, 300), seed + 6);
            push("correlation_length", lft::correlation_length(ens).xi, e);
            (void)v;
        } else if (name == "tau_int") {
            const auto m = lft::magnetization(ens);
            push("tau_int", lft::tau_int(m.per_config), 0.0);
        } else if (name == "mass_gap") {
            const auto fit = lft::mass_gap(ens);
            const auto [v, e] = lft::bootstrap_observable(
                ens, [](const lft::Ensemble& s) { return lft::mass_gap(s).m_gap; },
                std::min(resamples, 300), seed + 7);
            push("mass_gap", fit.m_gap, e);
            (void)v;
        } else if (name == "chiral_condensate") {
            const auto [v, e] = lft::bootstrap_observable(
                ens,
                [g_coupling](const lft::Ensemble& s) {
                    return lft::chiral_condensate(s, g_coupling);
                },
                resamples, seed + 8);
            push("chiral_condensate", lft::chiral_condensate(ens, g_coupling), e);
            (void)v;
        } else {
            throw lft::ConfigError("unknown observable '" + name + "'");
        }
    }

    if (format != "csv") throw lft::ConfigError("unknown format '" + format + "'");
    const std::string csv = lft::observable_csv(rows);
    if (out.empty())
        std::cout << csv;
    else
        write_text(out, csv);
    return 0;
}

int cmd_hwsim(const std::string& ckpt, double noise_sigma, bool recover,
              const std::string& report_path, const std::string& scaling_sizes, int recover_steps) {
    json prov;
    lft::FlowWeights w = lft::read_checkpoint(ckpt, &prov);
    lft::RunConfig cfg;
    if (prov.contains("config")) cfg = lft::parse_run_config(prov.at("config"));
    const lft::LatticeAction action = cfg.make_action();

    const auto profiles = lft::layer_profiles(w.config);

    lft::NoiseModel noise = cfg.noise;
    noise.sigma_uS = noise_sigma;
    auto degraded = lft::degraded_inference(w, cfg.conductance, noise, action, 2048,
                                            lft::derive_seed(cfg.seed, 0xe7a1));
    lft::RecoveryReport rec;
    rec.ess_clean = degraded.ess_clean;
    rec.ess_degraded = degraded.ess_degraded;
    rec.ess_recovered = degraded.ess_degraded;
    if (recover) {
        lft::TrainHyper hyper = cfg.train;
        hyper.steps = recover_steps;
        auto [recovered, r] = lft::lora_recovery(degraded, action, hyper);
        rec = r;
    }

    json doc = json::parse(lft::hardware_report_json(profiles, cfg.cost, &rec, &noise));
    if (!scaling_sizes.empty()) {
        std::vector<int> sizes;
        std::stringstream ss(scaling_sizes);
        std::string tok;
        while (std::getline(ss, tok, ',')) sizes.push_back(std::stoi(tok));
        json rows = json::array();
        for (const auto& row : lft::scaling_sweep(sizes, w.config, cfg.cost))
            rows.push_back({{"lattice", row.lattice},
                            {"analog_mac_fraction", row.analog_mac_fraction},
                            {"speedup", row.speedup},
                            {"energy_ratio", row.energy_ratio}});
        doc["scaling"] = rows;
    }
    write_text(report_path, doc.dump(2));
    std::cout << "ESS clean " << rec.ess_clean << ", degraded " << rec.ess_degraded;
    if (recover) std::cout << ", recovered " << rec.ess_recovered;
    std::cout << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& vary, const std::string& out_dir,
              const std::string& obs_list) {
    // "path.to.key=lo:hi:step"
    const size_t eq = vary.find('=');
    if (eq == std::string::npos) throw lft::ConfigError("--vary must look like key=lo:hi:step");
    const std::string path = vary.substr(0, eq);
    double lo = 0, hi = 0, step = 0;
    {
        std::stringstream ss(vary.substr(eq + 1));
        std::string a, b, c;
        if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c, ':'))
            throw lft::ConfigError("--vary must look like key=lo:hi:step");
        lo = std::stod(a);
        hi = std::stod(b);
        step = std::stod(c);
        if (step <= 0.0) throw lft::ConfigError("--vary step must be positive");
    }

    const json base_doc = load_json(config_path);
    std::vector<lft::ObservableRow> rows;
    lft::FlowWeights base_model = lft::init_flow_weights(lft::parse_run_config(base_doc).flow,
                                                         lft::parse_run_config(base_doc).seed);
    bool have_base = false;

    for (double v = lo; v <= hi + 1e-12; v += step) {
        json doc = base_doc;
        lft::apply_dotted_override(doc, path + "=" + std::to_string(v));
        const lft::RunConfig cfg = lft::parse_run_config(doc);
        const lft::LatticeAction action = cfg.make_action();

        if (!have_base) { // full training once, LoRA adaptation afterwards
            auto [w, rep] = lft::train(base_model, action, cfg.train);
            base_model = std::move(w);
            have_base = true;
        } else {
            lft::TrainHyper hyper = cfg.train;
            hyper.steps = std::max(1, cfg.train.steps / 4);
            base_model = lft::finetune_lora(base_model, action, hyper);
        }

        lft::FlowWeights local = base_model;
        const lft::Ensemble ens =
            lft::propose_and_sample(local, action, cfg.sample_n, lft::derive_seed(cfg.seed, 0x57e));

        std::stringstream ss(obs_list);
        std::string name;
        while (std::getline(ss, name, ',')) {
            double value = 0.0, error = 0.0;
            if (name == "susceptibility") {
                value = lft::susceptibility(ens);
                error = lft::bootstrap_observable(
                            ens, [](const lft::Ensemble& s) { return lft::susceptibility(s); }, 200,
                            cfg.seed)
                            .second;
            } else if (name == "ising_energy") {
                value = lft::ising_energy(ens);
                error = lft::bootstrap_observable(
                            ens, [](const lft::Ensemble& s) { return lft::ising_energy(s); }, 200,
                            cfg.seed)
                            .second;
            } else if (name == "correlation_length") {
                value = lft::correlation_length(ens).xi;
                error = lft::bootstrap_observable(
                            ens,
                            [](const lft::Ensemble& s) { return lft::correlation_length(s).xi; },
                            200, cfg.seed)
                            .second;
            } else if (name == "magnetization") {
                const auto m = lft::magnetization(ens);
                value = m.mean;
                error = lft::bootstrap_mean_error(m.per_config, 500, cfg.seed).second;
            } else {
                throw lft::ConfigError("sweep: unsupported observable '" + name + "'");
            }
            lft::ObservableRow row{name,
                                   value,
                                   error,
                                   static_cast<int64_t>(ens.size()),
                                   lattice_str(ens.geometry),
                                   doc["action"].value("kind", "phi4"),
                                   doc["action"]["params"].dump(),
                                   cfg.seed};
            rows.push_back(std::move(row));
        }
        std::cout << path << " = " << v << ": acceptance " << ens.acceptance_rate << "\n";
    }

    const std::string csv = lft::observable_csv(rows);
    if (out_dir.empty())
        std::cout << csv;
    else
        write_text(out_dir, csv);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"lattice flow sampler: train, sample, measure, emulate"};
    app.require_subcommand(1);

    std::string config_path, ckpt, out, report_path, ens_path, format = "csv";
    std::string obs_list, vary, scaling_sizes;
    std::vector<std::string> sets;
    int n = 0, chains = 1, steps_override = 0, resamples = 1000, recover_steps = 200;
    int64_t seed_flag = -1;
    double noise_sigma = 0.54;
    bool recover = false;

    auto* train = app.add_subcommand("train", "train a flow against a lattice action");
    train->add_option("--config", config_path)->required();
    train->add_option("--set", sets, "dotted-path config overrides");
    train->add_option("--out", out)->required();
    train->add_option("--report", report_path);

    auto* finetune = app.add_subcommand("finetune", "LoRA-only adaptation of a checkpoint");
    finetune->add_option("--ckpt", ckpt)->required();
    finetune->add_option("--set", sets);
    finetune->add_option("--out", out)->required();
    finetune->add_option("--steps", steps_override);

    auto* hmc = app.add_subcommand("hmc", "run the HMC baseline sampler");
    hmc->add_option("--config", config_path)->required();
    hmc->add_option("--set", sets);
    hmc->add_option("--n", n, "raw post-burn-in steps");
    hmc->add_option("--out", out)->required();
    hmc->add_option("--chains", chains);

    auto* sample = app.add_subcommand("sample", "flow-proposal independence Metropolis");
    sample->add_option("--ckpt", ckpt)->required();
    sample->add_option("--set", sets);
    sample->add_option("--n", n)->required();
    sample->add_option("--out", out)->required();
    sample->add_option("--chains", chains);
    sample->add_option("--seed", seed_flag);

    auto* observe = app.add_subcommand("observe", "measure observables on an ensemble");
    observe->add_option("--ens", ens_path)->required();
    observe->add_option("--obs", obs_list)->required();
    observe->add_option("--format", format);
    observe->add_option("--out", out);
    observe->add_option("--bootstrap", resamples);

    auto* hwsim = app.add_subcommand("hwsim", "analog deployment emulation and cost model");
    hwsim->add_option("--ckpt", ckpt)->required();
    hwsim->add_option("--noise-sigma", noise_sigma, "programming noise in uS");
    hwsim->add_flag("--recover", recover, "run LoRA error recovery");
    hwsim->add_option("--recover-steps", recover_steps);
    hwsim->add_option("--report", report_path)->required();
    hwsim->add_option("--scaling-sizes", scaling_sizes, "comma-separated lattice sizes");

    auto* sweep = app.add_subcommand("sweep", "scan an action parameter with LoRA adaptation");
    sweep->add_option("--config", config_path)->required();
    sweep->add_option("--vary", vary, "path=lo:hi:step")->required();
    sweep->add_option("--out", out);
    sweep->add_option("--obs", obs_list)->default_val("ising_energy,correlation_length");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train->parsed()) return cmd_train(config_path, sets, out, report_path);
        if (finetune->parsed()) return cmd_finetune(ckpt, sets, out, steps_override);
        if (hmc->parsed()) return cmd_hmc(config_path, sets, n, out, chains);
        if (sample->parsed()) return cmd_sample(ckpt, sets, n, out, chains, seed_flag);
        if (observe->parsed()) return cmd_observe(ens_path, obs_list, format, out, resamples);
        if (hwsim->parsed())
            return cmd_hwsim(ckpt, noise_sigma, recover, report_path, scaling_sizes, recover_steps);
        if (sweep->parsed()) return cmd_sweep(config_path, vary, out, obs_list);
    } catch (const lft::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const lft::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 1;
    } catch (const lft::Error& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
