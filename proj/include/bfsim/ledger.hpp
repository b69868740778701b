#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "bfsim/bytes.hpp"
#include "bfsim/crypto.hpp"
#include "bfsim/params.hpp"
#include "bfsim/script.hpp"

namespace bfsim::ledger {

using crypto::AddressHash;
using crypto::PublicKey;
using crypto::SecretKey;
using crypto::Signature;

struct OutPoint {
    Hash256 txid{};
    std::uint32_t index = 0;

    auto operator<=>(const OutPoint&) const = default;
};

/// P2PKH outputs lock to an address hash; anything else carries a script.
using Lock = std::variant<AddressHash, script::Script>;

struct TxOutput {
    std::int64_t value = 0;
    Lock lock;

    bool is_p2pkh() const { return std::holds_alternative<AddressHash>(lock); }
    const AddressHash* address() const { return std::get_if<AddressHash>(&lock); }
    bool operator==(const TxOutput&) const = default;
};

struct TxInput {
    OutPoint prevout;
    PublicKey pubkey;
    Signature signature;
    /// Additional witness items pushed after (signature, pubkey); used to
    /// redeem script-locked outputs such as the collision reward.
    std::vector<Bytes> extra;

    /// signature, pubkey, extra... as a push-only script.
    script::Script script_sig() const;
    bool operator==(const TxInput&) const = default;
};

enum class TxKind : std::uint8_t { Standard = 0, Coinbase = 1, Evidence = 2, RewardSpend = 3 };

std::string_view to_string(TxKind kind);

/// Identifies a P2PKH input of a suspect transaction.
struct SuspectRef {
    Hash256 txid{};
    std::uint32_t input_index = 0;

    auto operator<=>(const SuspectRef&) const = default;
};

/// Payload of an evidence transaction: a public key colliding with the one
/// published in the referenced inputs, plus the address frozen funds may go to.
struct EvidenceTransaction {
    std::vector<SuspectRef> suspect_refs;
    PublicKey alt_pubkey;
    AddressHash auxiliary_address;

    bool operator==(const EvidenceTransaction&) const = default;
};

struct Transaction {
    TxKind kind = TxKind::Standard;
    /// Coinbase only: makes otherwise identical coinbases distinct.
    std::uint64_t coinbase_height = 0;
    std::vector<TxInput> inputs;
    std::vector<TxOutput> outputs;
    std::optional<EvidenceTransaction> evidence;

    Bytes serialize() const;
    static Transaction deserialize(ByteReader& reader);
    /// Double SHA-256 of serialize().
    Hash256 txid() const;

    bool operator==(const Transaction&) const = default;
};

Transaction make_coinbase(std::uint64_t height, std::vector<TxOutput> outputs);
Transaction make_evidence_tx(EvidenceTransaction ev);

/// Serialization with every signature field emptied.
Bytes sighash(const Transaction& tx);

struct Block {
    std::uint64_t height = 0;
    Hash256 prev_id{};
    std::vector<Transaction> transactions;

    Bytes serialize() const;
    static Block deserialize(ByteView data);
    Hash256 block_id() const;
};

enum class RejectCode {
    MissingUtxo,
    PubkeyHashMismatch,
    BadSignature,
    TimeoutNotElapsed,
    ValueOverspend,
    DuplicateInput,
    ScriptFailed,
    MalformedTransaction,
    BadCoinbase,
    CoinbaseOverclaim,
    EvidenceDisabled,
    UnknownSuspectRef,
    PubkeysIdentical,
    AddressMismatch,
    SuspectOutputsAlreadySpent,
    NonemptyFee,
    UnknownFrozenOutput,
    WrongDestination,
    PartialSpend,
};

std::string_view to_string(RejectCode code);

/// Outcome of a consensus check. Default-constructed means valid.
class ValidationState {
public:
    static ValidationState ok() { return {}; }
    static ValidationState invalid(RejectCode code, std::string detail) {
        ValidationState s;
        s.code_ = code;
        s.detail_ = std::move(detail);
        return s;
    }
    static ValidationState timeout(std::uint64_t needed, std::uint64_t actual);

    bool is_valid() const { return !code_.has_value(); }
    explicit operator bool() const { return is_valid(); }
    std::optional<RejectCode> code() const { return code_; }
    const std::string& detail() const { return detail_; }
    /// TimeoutNotElapsed only: required and observed confirmation depth.
    std::uint64_t needed_depth() const { return needed_; }
    std::uint64_t actual_depth() const { return actual_; }
    std::string to_string() const;

private:
    std::optional<RejectCode> code_;
    std::string detail_;
    std::uint64_t needed_ = 0;
    std::uint64_t actual_ = 0;
};

class BlockRejected : public std::runtime_error {
public:
    BlockRejected(ValidationState state, std::size_t tx_index)
        : std::runtime_error("block rejected at tx " + std::to_string(tx_index) + ": " + state.to_string()),
          state_(std::move(state)),
          tx_index_(tx_index) {}
    const ValidationState& state() const { return state_; }
    std::size_t tx_index() const { return tx_index_; }

private:
    ValidationState state_;
    std::size_t tx_index_;
};

struct ChainConfig {
    ModelParams params;
    std::int64_t subsidy = 50;
    /// An output confirmed at height h is spendable in blocks of height >= h + spend_timeout.
    std::uint32_t spend_timeout = 6;
    bool evidence_consensus = true;

    bool operator==(const ChainConfig&) const = default;
};

struct UtxoEntry {
    TxOutput output;
    std::uint64_t height = 0;
    bool operator==(const UtxoEntry&) const = default;
};

/// Stolen value parked by an evidence transaction.
struct FrozenOutput {
    std::int64_t value = 0;
    AddressHash disputed_address;
    PublicKey required_pubkey;
    AddressHash destination;
    Hash256 origin_evidence{};
    std::uint64_t height = 0;

    bool operator==(const FrozenOutput&) const = default;
};

/// What one applied evidence transaction did to the state.
struct EvidenceEffect {
    Hash256 evidence_txid{};
    std::uint64_t height = 0;
    AddressHash disputed_address;
    std::vector<Hash256> suspect_txids;
    std::vector<OutPoint> removed_outpoints;
    std::vector<OutPoint> reverted_outpoints;
    std::int64_t removed_value = 0;
    std::int64_t reverted_value = 0;
    std::int64_t frozen_value = 0;
};

using UtxoMap = std::map<OutPoint, UtxoEntry>;
using FrozenMap = std::map<OutPoint, FrozenOutput>;

struct TxLocation {
    std::uint64_t height = 0;
    std::size_t index = 0;
};

struct Hash256Hasher {
    std::size_t operator()(const Hash256& h) const noexcept;
};

/// Blocks, unspent outputs and frozen outputs. Single writer: append_block
/// either applies a whole block or leaves the state untouched.
class ChainState {
public:
    explicit ChainState(ChainConfig config);

    /// Height-0 block whose coinbase may pay arbitrary amounts.
    static ChainState with_genesis(ChainConfig config, std::vector<TxOutput> allocations);

    const ChainConfig& config() const { return config_; }
    const ModelParams& params() const { return config_.params; }

    bool empty() const { return blocks_.empty(); }
    /// Height of the tip; throws std::logic_error on an empty chain.
    std::uint64_t height() const;
    /// Height the next appended block will have.
    std::uint64_t next_height() const { return blocks_.size(); }
    Hash256 tip_id() const;

    std::size_t block_count() const { return blocks_.size(); }
    const Block& block(std::uint64_t height) const { return *blocks_.at(height); }

    const UtxoMap& utxo() const { return utxo_; }
    const FrozenMap& frozen() const { return frozen_; }
    const std::vector<EvidenceEffect>& evidence_effects() const { return effects_; }

    /// Fee total recorded for an applied block.
    std::int64_t block_fees(std::uint64_t height) const { return fees_.at(height); }

    const Transaction* find_transaction(const Hash256& txid, TxLocation* where = nullptr) const;
    /// Any output ever created, spent or not.
    std::optional<TxOutput> find_output(const OutPoint& op) const;

    std::int64_t utxo_value() const;
    std::int64_t frozen_value() const;
    /// Value minted by coinbases: outputs minus the fees they collected.
    std::int64_t issued() const { return issued_; }
    /// Net value created (+) or destroyed (-) by evidence application.
    std::int64_t evidence_delta() const { return evidence_delta_; }

    /// Validates and applies a block at next_height(). txs[0] must be a coinbase.
    /// Throws BlockRejected; the state is unchanged on failure.
    void append_block(std::vector<Transaction> txs);

    /// Same config, block ids, UTXO set and frozen set.
    bool operator==(const ChainState& other) const;

private:
    friend struct StateAccess;

    void apply_block(Block block, bool unrestricted_coinbase);

    ChainConfig config_;
    std::vector<std::shared_ptr<const Block>> blocks_;
    std::vector<std::int64_t> fees_;
    UtxoMap utxo_;
    FrozenMap frozen_;
    std::unordered_map<Hash256, TxLocation, Hash256Hasher> tx_index_;
    std::vector<EvidenceEffect> effects_;
    std::int64_t issued_ = 0;
    std::int64_t evidence_delta_ = 0;
};

/// Mutable access for consensus code outside the ledger proper (evidence rules).
struct StateAccess {
    static UtxoMap& utxo(ChainState& s) { return s.utxo_; }
    static FrozenMap& frozen(ChainState& s) { return s.frozen_; }
    static std::vector<EvidenceEffect>& effects(ChainState& s) { return s.effects_; }
    static std::int64_t& evidence_delta(ChainState& s) { return s.evidence_delta_; }
};

/// Checks a Standard transaction against `state` as of a block at `at_height`.
ValidationState validate_transaction(const Transaction& tx, const ChainState& state, std::uint64_t at_height);

/// Functional form of ChainState::append_block.
ChainState append_block(ChainState state, std::vector<Transaction> txs);

enum class BuildErrorKind { KeyMismatch, Overspend, MissingUtxo };

class BuildError : public std::runtime_error {
public:
    BuildError(BuildErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    BuildErrorKind kind() const { return kind_; }

private:
    BuildErrorKind kind_;
};

struct Destination {
    AddressHash address;
    std::int64_t value = 0;
};

/// Signs a Standard transaction spending `sources` with `keys` (keys[i] owns sources[i]).
Transaction build_transaction(const std::vector<SecretKey>& keys, const std::vector<OutPoint>& sources,
                              const std::vector<Destination>& destinations, const ChainState& state);

/// Sum over Standard transactions of inputs minus outputs. Works for applied
/// blocks and for a candidate block on top of `state`.
std::int64_t total_fees(const Block& block, const ChainState& state);

/// Chain file: magic, params, config, then u32-length-prefixed blocks.
Bytes serialize_chain(const ChainState& state);
/// Replays every block; throws SerializationError or BlockRejected.
ChainState deserialize_chain(ByteView data);

Bytes serialize_lock(const Lock& lock);

}  // namespace bfsim::ledger
