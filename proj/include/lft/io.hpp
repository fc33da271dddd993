#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lft/flow.hpp"
#include "lft/hardware.hpp"
#include "lft/samplers.hpp"
#include "lft/training.hpp"

namespace lft {

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

/// Everything a run needs, parsed from a JSON config validated against the
/// published schema (unknown keys are rejected by full path).
struct RunConfig {
    LatticeGeometry lattice{{4, 4}, 1.0};
    ActionKind action_kind = ActionKind::phi4;
    Phi4Params phi4;
    GrapheneParams graphene;
    MixerConfig flow;
    TrainHyper train;
    HmcParams hmc;
    int sample_n = 2000; // flow-MH proposal count
    ConductanceMap conductance;
    NoiseModel noise;
    CostConstants cost;
    uint64_t seed = 0;

    LatticeAction make_action() const {
        return action_kind == ActionKind::phi4 ? LatticeAction(phi4) : LatticeAction(graphene);
    }
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& c);

/// Applies one "a.b.c=value" override onto a JSON document (value parsed as
/// int, float, bool, or string in that order).
void apply_dotted_override(nlohmann::json& j, const std::string& spec);

// ---------------------------------------------------------------------------
// LFTC ensembles / LFTW checkpoints
//
// Both formats carry a fixed little-endian binary body followed by a UTF-8
// JSON trailer whose byte length sits in the final 8 bytes. Round-trips
// are bitwise; version mismatches raise IoError.
// ---------------------------------------------------------------------------

void write_ensemble(const std::string& path, const Ensemble& ens,
                    const nlohmann::json& extra_meta = nlohmann::json::object());
Ensemble read_ensemble(const std::string& path, nlohmann::json* meta = nullptr);

void write_checkpoint(const std::string& path, FlowWeights& w,
                      const nlohmann::json& provenance = nlohmann::json::object());
FlowWeights read_checkpoint(const std::string& path, nlohmann::json* provenance = nullptr);

// ---------------------------------------------------------------------------
// Observable CSV
// ---------------------------------------------------------------------------

struct ObservableRow {
    std::string observable;
    double value = 0.0;
    double error = 0.0;
    int64_t n_configs = 0;
    std::string lattice;     // "L0xL1"
    std::string action_kind; // "phi4" | "graphene"
    std::string params_json;
    uint64_t seed = 0;
};

std::string observable_csv(const std::vector<ObservableRow>& rows);

nlohmann::json mixer_config_to_json(const MixerConfig& c);
MixerConfig mixer_config_from_json(const nlohmann::json& j);

} // namespace lft
