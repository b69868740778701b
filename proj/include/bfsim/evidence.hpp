#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>

#include "bfsim/ledger.hpp"

// Collision evidence and the freeze rules it triggers.
//
// An evidence transaction names P2PKH inputs ("suspect" inputs) and presents a
// different public key that hashes to the same address. Once it is in a block
// the chain rolls back the suspect transactions' effects, restores co-inputs
// taken from other addresses, and parks the disputed value in a FrozenOutput
// that only the suspect key can release, and only to the auxiliary address.
namespace bfsim::evidence {

using ledger::ChainState;
using ledger::EvidenceTransaction;
using ledger::Transaction;
using ledger::ValidationState;

enum class NoEvidenceKind { NoTheftFound, KeyMatchesThief };

std::string_view to_string(NoEvidenceKind kind);

class NoEvidence : public std::runtime_error {
public:
    NoEvidence(NoEvidenceKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    NoEvidenceKind kind() const { return kind_; }

private:
    NoEvidenceKind kind_;
};

/// Key behind the auxiliary address the victim names in its evidence.
crypto::SecretKey auxiliary_key(const crypto::SecretKey& victim_sk, const ModelParams& params);

/// Looks for spends from the victim's address made with a different public
/// key and packages them as evidence. Throws NoEvidence when there are no
/// spends at all (NoTheftFound) or every spend used the victim's own key
/// (KeyMatchesThief).
EvidenceTransaction make_evidence(const crypto::SecretKey& victim_sk, const ChainState& chain);

ValidationState validate_evidence(const EvidenceTransaction& ev, const ChainState& chain);

/// validate_evidence plus the transaction-shape rules (no inputs, no outputs).
ValidationState validate_evidence_tx(const Transaction& tx, const ChainState& chain);

/// Transactions in blocks at height >= oldest_height with a P2PKH input
/// revealing `colliding_pubkey`.
std::set<Hash256> find_suspect_set(const ChainState& chain, const crypto::PublicKey& colliding_pubkey,
                                   std::uint64_t oldest_height);

/// Runs the four freeze operations against `state`. Expects validate_evidence
/// to have passed; called by ChainState while applying a block.
ledger::EvidenceEffect apply_evidence_in_place(ChainState& state, const EvidenceTransaction& ev,
                                               const Hash256& evidence_txid, std::uint64_t height);

/// Appends a block holding only a zero-output coinbase and `ev`.
/// Throws ledger::BlockRejected when the evidence is invalid.
ChainState apply_evidence(ChainState state, const EvidenceTransaction& ev);

/// Lower median of total fees over the last min(6, height + 1) blocks.
std::int64_t evidence_miner_reward(const ChainState& chain);

/// Checks a RewardSpend transaction against the frozen output it consumes.
ValidationState spend_frozen(const Transaction& tx, const ChainState& state);

/// Signs a RewardSpend moving a frozen output's full value to `to`.
Transaction build_frozen_spend(const crypto::SecretKey& signer, const ledger::OutPoint& frozen,
                               const crypto::AddressHash& to, const ChainState& state);

}  // namespace bfsim::evidence
