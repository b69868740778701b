#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bfsim/attacker.hpp"
#include "bfsim/ledger.hpp"

// End-to-end experiment: fund addresses, brute-force one, steal, publish
// evidence, and report what the consensus rules did with the loot.
namespace bfsim::scenario {

inline constexpr const char* kVersion = "0.1.0";

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
    ModelParams params;
    std::int64_t subsidy = 50;
    std::uint32_t spend_timeout = 6;
    bool evidence_consensus = true;

    std::uint32_t funded_count = 64;
    std::int64_t funded_value = 100;

    /// "random" or "sequential"
    std::string strategy = "random";
    std::uint64_t range_start = 0;
    std::uint64_t max_trials = std::uint64_t{1} << 22;
    unsigned workers = 1;
    std::int64_t steal_fee = 1;

    /// The suspect key releases the frozen output to the auxiliary address.
    bool white_hat = false;
    /// Value locked to the collision-reward script at genesis; 0 disables it.
    std::int64_t reward_value = 0;

    std::uint64_t seed = 1;

    /// Throws ConfigError.
    void validate() const;
    /// Normalised key=value text; its SHA-256 is the report's config_hash.
    std::string canonical_text() const;
};

/// INI-style text: [params] [chain] [funding] [attack] [evidence] [reward] [run]
/// sections of key=value pairs. Throws ConfigError on unknown keys or bad values.
ScenarioConfig parse_config(const std::string& text);

struct Artifacts {
    std::string victim_keys;  // one hex key per line
    std::string hit_log;      // "hex_sk hex_addr" per hit
    std::string reward_script;
    std::string reward_witness;            // victim's redemption witness
    std::string reward_witness_adversary;  // adversary's redemption witness
};

struct SimulationResult {
    nlohmann::json report;  // deterministic for a given config
    nlohmann::json timing;  // wall-clock attack rates
    ledger::ChainState chain;
    Artifacts artifacts;
    /// Name of the first violated invariant, if any.
    std::optional<std::string> violation;
};

SimulationResult run_simulation(const ScenarioConfig& config);

/// `utxo`, `frozen` and height fields of a chain.
nlohmann::json state_dump(const ledger::ChainState& chain);

/// Witness file: key=value lines `bsec`, `baddr`, `digest_bits`, `message`
/// (hex) and `script_sig` (push-only script text).
struct Witness {
    ModelParams params;
    Bytes message;
    script::Script script_sig;
};

Witness parse_witness(const std::string& text, const ModelParams& defaults);
std::string format_witness(const ModelParams& params, ByteView message, const script::Script& script_sig);

/// Reproducible sub-seed for a named stream.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0);

}  // namespace bfsim::scenario
