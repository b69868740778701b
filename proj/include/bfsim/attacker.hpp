#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "bfsim/crypto.hpp"
#include "bfsim/ledger.hpp"

// The brute-force adversary: index every funded address, then hash candidate
// secret keys until one lands on an indexed address.
namespace bfsim::attacker {

using crypto::AddressHash;
using crypto::SecretKey;
using ledger::OutPoint;

struct IndexEntry {
    std::vector<std::pair<OutPoint, std::int64_t>> outputs;
    std::int64_t total = 0;
};

class AddrIndex {
public:
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const IndexEntry* find(const AddressHash& addr) const;
    void add(const AddressHash& addr, const OutPoint& op, std::int64_t value);
    /// Registers an address with no funds (its public key is already public).
    void add_unfunded(const AddressHash& addr);

    const std::unordered_map<AddressHash, IndexEntry, crypto::AddressHashHasher>& entries() const {
        return entries_;
    }

private:
    std::unordered_map<AddressHash, IndexEntry, crypto::AddressHashHasher> entries_;
};

/// One entry per distinct funded P2PKH address in the UTXO set. With
/// `include_published_unfunded`, addresses whose public keys appear in any
/// input are indexed even when empty (reward hunting).
AddrIndex build_addr_index(const ledger::ChainState& state, bool include_published_unfunded = false);

/// Keys start, start+1, ..., start+count-1 (as integers).
struct SequentialRange {
    std::uint64_t start = 0;
    std::uint64_t count = 1;
};

/// `count` keys drawn uniformly with replacement; worker i draws from a
/// generator seeded with (seed, i).
struct RandomSample {
    std::uint64_t seed = 0;
    std::uint64_t count = 1;
};

struct AttackConfig {
    std::variant<SequentialRange, RandomSample> strategy = RandomSample{};
    unsigned workers = 1;
    /// Each worker stops once the shared hit count reaches this. The hit
    /// set is only reproducible without a cap or with workers == 1.
    std::optional<std::uint64_t> stop_after_hits;
};

struct Hit {
    SecretKey key;
    AddressHash address;
    std::vector<OutPoint> outpoints;
};

struct AttackReport {
    std::uint64_t trials = 0;
    std::vector<Hit> hits;  // sorted by key
    std::size_t index_size = 0;
    double elapsed = 0.0;      // seconds
    double r0 = 0.0;           // trials per second
    double r_empirical = 0.0;  // hits per second
    double r_predicted = 0.0;  // index_size / 2^address_bits * r0

    /// trials, hits, r0, r_empirical, r_predicted, hit_keys.
    nlohmann::json to_json() const;
};

/// Throws ParamsError for an empty range or a range leaving the key space.
AttackReport search(const AttackConfig& config, const AddrIndex& index, const ModelParams& params);

/// R = |AddrList| / 2^address_bits * R0.
double predicted_rate(std::size_t index_size, double r0, const ModelParams& params);

/// Moves everything in `outpoints` (minus `fee`) to `adversary`.
ledger::Transaction craft_stealing_tx(const SecretKey& sk, std::span<const OutPoint> outpoints,
                                      const AddressHash& adversary, const ledger::ChainState& state,
                                      std::int64_t fee = 1);

/// "hex_sk hex_addr" lines, one per hit.
std::string hit_log_lines(const AttackReport& report);

}  // namespace bfsim::attacker
