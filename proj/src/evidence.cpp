#include "bfsim/evidence.hpp"

#include <algorithm>
#include <map>

#include "bfsim/hash.hpp"

namespace bfsim::evidence {

using ledger::OutPoint;
using ledger::RejectCode;
using ledger::TxKind;
using ledger::TxLocation;

namespace {

struct ResolvedInput {
    const Transaction* tx = nullptr;
    TxLocation where;
    const ledger::TxInput* input = nullptr;
    ledger::TxOutput source;
};

std::optional<ResolvedInput> resolve(const ChainState& chain, const ledger::SuspectRef& ref) {
    ResolvedInput r;
    r.tx = chain.find_transaction(ref.txid, &r.where);
    if (!r.tx || r.tx->kind != TxKind::Standard || ref.input_index >= r.tx->inputs.size()) return std::nullopt;
    r.input = &r.tx->inputs[ref.input_index];
    auto src = chain.find_output(r.input->prevout);
    if (!src || !src->is_p2pkh()) return std::nullopt;
    r.source = std::move(*src);
    return r;
}

bool all_outputs_unspent(const ChainState& chain, const Hash256& txid, const Transaction& tx) {
    for (std::uint32_t j = 0; j < tx.outputs.size(); ++j) {
        if (!chain.utxo().count(OutPoint{txid, j})) return false;
    }
    return true;
}

}  // namespace

std::string_view to_string(NoEvidenceKind kind) {
    return kind == NoEvidenceKind::NoTheftFound ? "NoTheftFound" : "KeyMatchesThief";
}

crypto::SecretKey auxiliary_key(const crypto::SecretKey& victim_sk, const ModelParams& params) {
    Bytes tagged{'a', 'u', 'x'};
    tagged.insert(tagged.end(), victim_sk.bytes().begin(), victim_sk.bytes().end());
    Hash256 h = hash::sha256(tagged);
    std::uint64_t seed = 0;
    for (int i = 0; i < 8; ++i) seed = (seed << 8) | h[static_cast<std::size_t>(i)];
    return crypto::keygen(seed, params);
}

EvidenceTransaction make_evidence(const crypto::SecretKey& victim_sk, const ChainState& chain) {
    const auto& params = chain.params();
    const crypto::PublicKey victim_pk = crypto::derive_pubkey(victim_sk, params);
    const crypto::AddressHash victim_addr = crypto::derive_address_hash(victim_pk, params);

    EvidenceTransaction ev;
    bool own_spend = false;
    for (std::uint64_t h = 0; h < chain.block_count(); ++h) {
        for (const auto& tx : chain.block(h).transactions) {
            if (tx.kind != TxKind::Standard) continue;
            Hash256 txid;
            bool have_txid = false;
            for (std::uint32_t i = 0; i < tx.inputs.size(); ++i) {
                const auto& in = tx.inputs[i];
                auto src = chain.find_output(in.prevout);
                if (!src || !src->address() || *src->address() != victim_addr) continue;
                if (in.pubkey == victim_pk) {
                    own_spend = true;
                    continue;
                }
                if (!have_txid) {
                    txid = tx.txid();
                    have_txid = true;
                }
                ev.suspect_refs.push_back(ledger::SuspectRef{txid, i});
            }
        }
    }
    if (ev.suspect_refs.empty()) {
        if (own_spend) {
            throw NoEvidence(NoEvidenceKind::KeyMatchesThief,
                             "every spend from the address revealed the victim's own public key");
        }
        throw NoEvidence(NoEvidenceKind::NoTheftFound, "no spend from the victim's address");
    }
    ev.alt_pubkey = victim_pk;
    ev.auxiliary_address = crypto::address_of(auxiliary_key(victim_sk, params), params);
    return ev;
}

ValidationState validate_evidence(const EvidenceTransaction& ev, const ChainState& chain) {
    const auto& params = chain.params();
    if (ev.suspect_refs.empty()) return ValidationState::invalid(RejectCode::UnknownSuspectRef, "no suspect refs");
    if (ev.auxiliary_address.bits != params.address_bits) {
        return ValidationState::invalid(RejectCode::MalformedTransaction, "auxiliary address has wrong width");
    }
    const crypto::AddressHash alt_addr = crypto::derive_address_hash(ev.alt_pubkey, params);
    std::optional<crypto::AddressHash> disputed;
    for (const auto& ref : ev.suspect_refs) {
        auto r = resolve(chain, ref);
        if (!r) {
            return ValidationState::invalid(RejectCode::UnknownSuspectRef,
                                            to_hex(ref.txid) + ":" + std::to_string(ref.input_index));
        }
        if (r->input->pubkey == ev.alt_pubkey) {
            return ValidationState::invalid(RejectCode::PubkeysIdentical, to_hex(ref.txid));
        }
        const auto& lock = *r->source.address();
        if (alt_addr != lock || (disputed && *disputed != lock)) {
            return ValidationState::invalid(RejectCode::AddressMismatch, to_hex(ref.txid));
        }
        disputed = lock;
        if (!all_outputs_unspent(chain, ref.txid, *r->tx)) {
            return ValidationState::invalid(RejectCode::SuspectOutputsAlreadySpent, to_hex(ref.txid));
        }
    }
    return ValidationState::ok();
}

ValidationState validate_evidence_tx(const Transaction& tx, const ChainState& chain) {
    if (tx.kind != TxKind::Evidence || !tx.evidence) {
        return ValidationState::invalid(RejectCode::MalformedTransaction, "not an evidence transaction");
    }
    if (!tx.inputs.empty() || !tx.outputs.empty()) {
        return ValidationState::invalid(RejectCode::NonemptyFee, "evidence transactions carry no value");
    }
    return validate_evidence(*tx.evidence, chain);
}

std::set<Hash256> find_suspect_set(const ChainState& chain, const crypto::PublicKey& colliding_pubkey,
                                   std::uint64_t oldest_height) {
    std::set<Hash256> out;
    for (std::uint64_t h = oldest_height; h < chain.block_count(); ++h) {
        for (const auto& tx : chain.block(h).transactions) {
            if (tx.kind != TxKind::Standard) continue;
            bool hit = std::any_of(tx.inputs.begin(), tx.inputs.end(), [&](const ledger::TxInput& in) {
                if (in.pubkey != colliding_pubkey) return false;
                auto src = chain.find_output(in.prevout);
                return src && src->is_p2pkh();
            });
            if (hit) out.insert(tx.txid());
        }
    }
    return out;
}

ledger::EvidenceEffect apply_evidence_in_place(ChainState& state, const EvidenceTransaction& ev,
                                               const Hash256& evidence_txid, std::uint64_t height) {
    auto& utxo = ledger::StateAccess::utxo(state);
    auto& frozen = ledger::StateAccess::frozen(state);

    ledger::EvidenceEffect effect;
    effect.evidence_txid = evidence_txid;
    effect.height = height;

    // Colliding keys in first-reference order; the oldest suspect block bounds the search.
    std::vector<crypto::PublicKey> colliding;
    std::uint64_t oldest = height;
    for (const auto& ref : ev.suspect_refs) {
        auto r = resolve(state, ref);
        effect.disputed_address = *r->source.address();
        oldest = std::min(oldest, r->where.height);
        if (std::find(colliding.begin(), colliding.end(), r->input->pubkey) == colliding.end()) {
            colliding.push_back(r->input->pubkey);
        }
    }
    const auto& disputed = effect.disputed_address;

    // Every transaction revealing a colliding key since the oldest suspect block.
    std::map<Hash256, std::size_t> owner;  // suspect txid -> index into `colliding`
    for (std::size_t k = 0; k < colliding.size(); ++k) {
        for (const auto& txid : find_suspect_set(state, colliding[k], oldest)) owner.emplace(txid, k);
    }
    for (const auto& [txid, k] : owner) effect.suspect_txids.push_back(txid);

    // Drop suspect outputs and whatever is still locked to the disputed address.
    for (const auto& txid : effect.suspect_txids) {
        const Transaction* tx = state.find_transaction(txid);
        for (std::uint32_t j = 0; j < tx->outputs.size(); ++j) {
            auto it = utxo.find(OutPoint{txid, j});
            if (it == utxo.end()) continue;
            effect.removed_value += it->second.output.value;
            effect.removed_outpoints.push_back(it->first);
            utxo.erase(it);
        }
    }
    for (auto it = utxo.begin(); it != utxo.end();) {
        const auto* addr = it->second.output.address();
        if (addr && *addr == disputed) {
            effect.removed_value += it->second.output.value;
            effect.removed_outpoints.push_back(it->first);
            it = utxo.erase(it);
        } else {
            ++it;
        }
    }

    // Restore non-disputed inputs; disputed inputs plus fees become frozen.
    std::vector<std::int64_t> frozen_by_key(colliding.size(), 0);
    for (const auto& [txid, k] : owner) {
        const Transaction* tx = state.find_transaction(txid);
        std::int64_t in_total = 0;
        for (const auto& in : tx->inputs) {
            auto src = state.find_output(in.prevout);
            in_total += src->value;
            const auto* addr = src->address();
            if (addr && *addr == disputed) {
                frozen_by_key[k] += src->value;
                continue;
            }
            if (owner.count(in.prevout.txid) || utxo.count(in.prevout)) continue;
            TxLocation where;
            state.find_transaction(in.prevout.txid, &where);
            utxo.emplace(in.prevout, ledger::UtxoEntry{*src, where.height});
            effect.reverted_outpoints.push_back(in.prevout);
            effect.reverted_value += src->value;
        }
        std::int64_t out_total = 0;
        for (const auto& out : tx->outputs) out_total += out.value;
        frozen_by_key[k] += in_total - out_total;
    }
    for (std::size_t k = 0; k < colliding.size(); ++k) {
        ledger::FrozenOutput f;
        f.value = frozen_by_key[k];
        f.disputed_address = disputed;
        f.required_pubkey = colliding[k];
        f.destination = ev.auxiliary_address;
        f.origin_evidence = evidence_txid;
        f.height = height;
        frozen.insert_or_assign(OutPoint{evidence_txid, static_cast<std::uint32_t>(k)}, std::move(f));
        effect.frozen_value += frozen_by_key[k];
    }

    ledger::StateAccess::evidence_delta(state) += effect.frozen_value + effect.reverted_value - effect.removed_value;
    ledger::StateAccess::effects(state).push_back(effect);
    return effect;
}

ChainState apply_evidence(ChainState state, const EvidenceTransaction& ev) {
    std::uint64_t h = state.next_height();
    state.append_block({ledger::make_coinbase(h, {}), ledger::make_evidence_tx(ev)});
    return state;
}

std::int64_t evidence_miner_reward(const ChainState& chain) {
    std::size_t n = std::min<std::size_t>(6, chain.block_count());
    if (n == 0) return 0;
    std::vector<std::int64_t> fees;
    for (std::size_t i = chain.block_count() - n; i < chain.block_count(); ++i) fees.push_back(chain.block_fees(i));
    std::sort(fees.begin(), fees.end());
    return fees[(n - 1) / 2];
}

ValidationState spend_frozen(const Transaction& tx, const ChainState& state) {
    if (tx.kind != TxKind::RewardSpend || tx.inputs.size() != 1 || tx.outputs.size() != 1) {
        return ValidationState::invalid(RejectCode::MalformedTransaction, "frozen spend needs one input, one output");
    }
    auto it = state.frozen().find(tx.inputs[0].prevout);
    if (it == state.frozen().end()) return ValidationState::invalid(RejectCode::UnknownFrozenOutput, "");
    const auto& f = it->second;
    if (!crypto::verify(f.required_pubkey, ledger::sighash(tx), tx.inputs[0].signature, state.params())) {
        return ValidationState::invalid(RejectCode::BadSignature, "not signed by the suspect key");
    }
    const auto& out = tx.outputs[0];
    if (!out.address() || *out.address() != f.destination) {
        return ValidationState::invalid(RejectCode::WrongDestination, "frozen funds may only go to the auxiliary address");
    }
    if (out.value != f.value) {
        return ValidationState::invalid(RejectCode::PartialSpend,
                                        "pays " + std::to_string(out.value) + " of " + std::to_string(f.value));
    }
    return ValidationState::ok();
}

Transaction build_frozen_spend(const crypto::SecretKey& signer, const OutPoint& frozen,
                               const crypto::AddressHash& to, const ChainState& state) {
    const auto& params = state.params();
    Transaction tx;
    tx.kind = TxKind::RewardSpend;
    auto it = state.frozen().find(frozen);
    std::int64_t value = it == state.frozen().end() ? 0 : it->second.value;
    tx.inputs.push_back(ledger::TxInput{frozen, crypto::derive_pubkey(signer, params), {}, {}});
    tx.outputs.push_back(ledger::TxOutput{value, to});
    tx.inputs[0].signature = crypto::sign(signer, ledger::sighash(tx), params);
    return tx;
}

}  // namespace bfsim::evidence
