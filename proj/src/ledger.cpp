#include "bfsim/ledger.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <numeric>
#include <set>

#include "bfsim/errors.hpp"
#include "bfsim/evidence.hpp"
#include "bfsim/hash.hpp"

namespace bfsim::ledger {

namespace {

constexpr std::size_t kMaxField = 1u << 20;
constexpr std::uint8_t kLockAddress = 0;
constexpr std::uint8_t kLockScript = 1;

void write_address(ByteWriter& w, const AddressHash& a) {
    w.u8(a.bits);
    w.raw(a.view());
}

AddressHash read_address(ByteReader& r) {
    int bits = r.u8();
    std::size_t len = (static_cast<std::size_t>(bits) + 7) / 8;
    auto data = r.raw(len);
    try {
        return AddressHash::from_bytes(data, bits);
    } catch (const ParamsError& e) {
        throw SerializationError(std::string("bad address: ") + e.what());
    }
}

void write_lock(ByteWriter& w, const Lock& lock) {
    if (const auto* a = std::get_if<AddressHash>(&lock)) {
        w.u8(kLockAddress);
        write_address(w, *a);
    } else {
        w.u8(kLockScript);
        w.var_bytes(script::serialize_script(std::get<script::Script>(lock)));
    }
}

Lock read_lock(ByteReader& r) {
    std::uint8_t tag = r.u8();
    if (tag == kLockAddress) return read_address(r);
    if (tag == kLockScript) {
        Bytes raw = r.var_bytes(kMaxField);
        try {
            return script::deserialize_script(raw);
        } catch (const script::ParseError& e) {
            throw SerializationError(std::string("bad lock script: ") + e.what());
        }
    }
    throw SerializationError("unknown lock tag");
}

Bytes serialize_tx(const Transaction& tx, bool strip_signatures) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(tx.kind));
    if (tx.kind == TxKind::Coinbase) w.u64(tx.coinbase_height);
    w.u32(static_cast<std::uint32_t>(tx.inputs.size()));
    for (const auto& in : tx.inputs) {
        w.raw(in.prevout.txid);
        w.u32(in.prevout.index);
        w.var_bytes(in.pubkey.data);
        w.var_bytes(strip_signatures ? ByteView{} : ByteView(in.signature.data));
        w.u32(static_cast<std::uint32_t>(in.extra.size()));
        for (const auto& e : in.extra) w.var_bytes(e);
    }
    w.u32(static_cast<std::uint32_t>(tx.outputs.size()));
    for (const auto& out : tx.outputs) {
        w.u64(static_cast<std::uint64_t>(out.value));
        write_lock(w, out.lock);
    }
    if (tx.kind == TxKind::Evidence) {
        static const EvidenceTransaction kEmpty{};
        const auto& ev = tx.evidence ? *tx.evidence : kEmpty;
        w.u32(static_cast<std::uint32_t>(ev.suspect_refs.size()));
        for (const auto& ref : ev.suspect_refs) {
            w.raw(ref.txid);
            w.u32(ref.input_index);
        }
        w.var_bytes(ev.alt_pubkey.data);
        write_address(w, ev.auxiliary_address);
    }
    return std::move(w).take();
}

bool add_overflows(std::int64_t a, std::int64_t b) {
    return b > 0 && a > std::numeric_limits<std::int64_t>::max() - b;
}

// Sum of output values, or nullopt for negative values or overflow.
std::optional<std::int64_t> output_sum(const Transaction& tx) {
    std::int64_t total = 0;
    for (const auto& out : tx.outputs) {
        if (out.value < 0 || add_overflows(total, out.value)) return std::nullopt;
        total += out.value;
    }
    return total;
}

}  // namespace

script::Script TxInput::script_sig() const {
    std::vector<Bytes> items{signature.data, pubkey.data};
    items.insert(items.end(), extra.begin(), extra.end());
    return script::push_only(items);
}

std::string_view to_string(TxKind kind) {
    switch (kind) {
        case TxKind::Standard: return "Standard";
        case TxKind::Coinbase: return "Coinbase";
        case TxKind::Evidence: return "Evidence";
        case TxKind::RewardSpend: return "RewardSpend";
    }
    return "Unknown";
}

Bytes Transaction::serialize() const { return serialize_tx(*this, false); }

Transaction Transaction::deserialize(ByteReader& r) {
    Transaction tx;
    std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(TxKind::RewardSpend)) throw SerializationError("unknown transaction kind");
    tx.kind = static_cast<TxKind>(kind);
    if (tx.kind == TxKind::Coinbase) tx.coinbase_height = r.u64();
    std::uint32_t n_in = r.u32();
    if (n_in > r.remaining()) throw SerializationError("input count exceeds data");
    for (std::uint32_t i = 0; i < n_in; ++i) {
        TxInput in;
        in.prevout.txid = r.hash256();
        in.prevout.index = r.u32();
        in.pubkey.data = r.var_bytes(kMaxField);
        in.signature.data = r.var_bytes(kMaxField);
        std::uint32_t n_extra = r.u32();
        if (n_extra > r.remaining()) throw SerializationError("witness count exceeds data");
        for (std::uint32_t j = 0; j < n_extra; ++j) in.extra.push_back(r.var_bytes(kMaxField));
        tx.inputs.push_back(std::move(in));
    }
    std::uint32_t n_out = r.u32();
    if (n_out > r.remaining()) throw SerializationError("output count exceeds data");
    for (std::uint32_t i = 0; i < n_out; ++i) {
        TxOutput out;
        out.value = static_cast<std::int64_t>(r.u64());
        out.lock = read_lock(r);
        tx.outputs.push_back(std::move(out));
    }
    if (tx.kind == TxKind::Evidence) {
        EvidenceTransaction ev;
        std::uint32_t n_refs = r.u32();
        if (n_refs > r.remaining()) throw SerializationError("suspect ref count exceeds data");
        for (std::uint32_t i = 0; i < n_refs; ++i) {
            SuspectRef ref;
            ref.txid = r.hash256();
            ref.input_index = r.u32();
            ev.suspect_refs.push_back(ref);
        }
        ev.alt_pubkey.data = r.var_bytes(kMaxField);
        ev.auxiliary_address = read_address(r);
        tx.evidence = std::move(ev);
    }
    return tx;
}

Hash256 Transaction::txid() const { return hash::sha256d(serialize()); }

Transaction make_coinbase(std::uint64_t height, std::vector<TxOutput> outputs) {
    Transaction tx;
    tx.kind = TxKind::Coinbase;
    tx.coinbase_height = height;
    tx.outputs = std::move(outputs);
    return tx;
}

Transaction make_evidence_tx(EvidenceTransaction ev) {
    Transaction tx;
    tx.kind = TxKind::Evidence;
    tx.evidence = std::move(ev);
    return tx;
}

Bytes sighash(const Transaction& tx) { return serialize_tx(tx, true); }

Bytes serialize_lock(const Lock& lock) {
    ByteWriter w;
    write_lock(w, lock);
    return std::move(w).take();
}

Bytes Block::serialize() const {
    ByteWriter w;
    w.u64(height);
    w.raw(prev_id);
    w.u32(static_cast<std::uint32_t>(transactions.size()));
    for (const auto& tx : transactions) w.var_bytes(tx.serialize());
    return std::move(w).take();
}

Block Block::deserialize(ByteView data) {
    ByteReader r(data);
    Block b;
    b.height = r.u64();
    b.prev_id = r.hash256();
    std::uint32_t n = r.u32();
    if (n > r.remaining()) throw SerializationError("transaction count exceeds data");
    for (std::uint32_t i = 0; i < n; ++i) {
        Bytes raw = r.var_bytes(std::numeric_limits<std::uint32_t>::max());
        ByteReader tr(raw);
        b.transactions.push_back(Transaction::deserialize(tr));
        if (!tr.empty()) throw SerializationError("trailing bytes after transaction");
    }
    if (!r.empty()) throw SerializationError("trailing bytes after block");
    return b;
}

Hash256 Block::block_id() const { return hash::sha256d(serialize()); }

std::string_view to_string(RejectCode code) {
    switch (code) {
        case RejectCode::MissingUtxo: return "MissingUtxo";
        case RejectCode::PubkeyHashMismatch: return "PubkeyHashMismatch";
        case RejectCode::BadSignature: return "BadSignature";
        case RejectCode::TimeoutNotElapsed: return "TimeoutNotElapsed";
        case RejectCode::ValueOverspend: return "ValueOverspend";
        case RejectCode::DuplicateInput: return "DuplicateInput";
        case RejectCode::ScriptFailed: return "ScriptFailed";
        case RejectCode::MalformedTransaction: return "MalformedTransaction";
        case RejectCode::BadCoinbase: return "BadCoinbase";
        case RejectCode::CoinbaseOverclaim: return "CoinbaseOverclaim";
        case RejectCode::EvidenceDisabled: return "EvidenceDisabled";
        case RejectCode::UnknownSuspectRef: return "UnknownSuspectRef";
        case RejectCode::PubkeysIdentical: return "PubkeysIdentical";
        case RejectCode::AddressMismatch: return "AddressMismatch";
        case RejectCode::SuspectOutputsAlreadySpent: return "SuspectOutputsAlreadySpent";
        case RejectCode::NonemptyFee: return "NonemptyFee";
        case RejectCode::UnknownFrozenOutput: return "UnknownFrozenOutput";
        case RejectCode::WrongDestination: return "WrongDestination";
        case RejectCode::PartialSpend: return "PartialSpend";
    }
    return "Unknown";
}

ValidationState ValidationState::timeout(std::uint64_t needed, std::uint64_t actual) {
    auto s = invalid(RejectCode::TimeoutNotElapsed,
                     "needed depth " + std::to_string(needed) + ", actual " + std::to_string(actual));
    s.needed_ = needed;
    s.actual_ = actual;
    return s;
}

std::string ValidationState::to_string() const {
    if (is_valid()) return "ok";
    std::string s(ledger::to_string(*code_));
    if (!detail_.empty()) s += " (" + detail_ + ")";
    return s;
}

std::size_t Hash256Hasher::operator()(const Hash256& h) const noexcept {
    std::size_t v;
    std::memcpy(&v, h.data(), sizeof v);
    return v;
}

ChainState::ChainState(ChainConfig config) : config_(std::move(config)) {
    config_.params.validate();
    if (config_.subsidy < 0) throw ParamsError("subsidy must be non-negative");
}

ChainState ChainState::with_genesis(ChainConfig config, std::vector<TxOutput> allocations) {
    ChainState state(std::move(config));
    Block genesis;
    genesis.height = 0;
    genesis.transactions.push_back(make_coinbase(0, std::move(allocations)));
    state.apply_block(std::move(genesis), true);
    return state;
}

std::uint64_t ChainState::height() const {
    if (blocks_.empty()) throw std::logic_error("chain has no blocks");
    return blocks_.size() - 1;
}

Hash256 ChainState::tip_id() const { return blocks_.empty() ? Hash256{} : blocks_.back()->block_id(); }

const Transaction* ChainState::find_transaction(const Hash256& txid, TxLocation* where) const {
    auto it = tx_index_.find(txid);
    if (it == tx_index_.end()) return nullptr;
    if (where) *where = it->second;
    return &blocks_[it->second.height]->transactions[it->second.index];
}

std::optional<TxOutput> ChainState::find_output(const OutPoint& op) const {
    const Transaction* tx = find_transaction(op.txid);
    if (!tx || op.index >= tx->outputs.size()) return std::nullopt;
    return tx->outputs[op.index];
}

std::int64_t ChainState::utxo_value() const {
    return std::accumulate(utxo_.begin(), utxo_.end(), std::int64_t{0},
                           [](std::int64_t acc, const auto& kv) { return acc + kv.second.output.value; });
}

std::int64_t ChainState::frozen_value() const {
    return std::accumulate(frozen_.begin(), frozen_.end(), std::int64_t{0},
                           [](std::int64_t acc, const auto& kv) { return acc + kv.second.value; });
}

void ChainState::append_block(std::vector<Transaction> txs) {
    Block block;
    block.height = next_height();
    block.prev_id = tip_id();
    block.transactions = std::move(txs);
    ChainState next = *this;
    next.apply_block(std::move(block), false);
    *this = std::move(next);
}

bool ChainState::operator==(const ChainState& other) const {
    if (!(config_ == other.config_) || blocks_.size() != other.blocks_.size()) return false;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (blocks_[i]->block_id() != other.blocks_[i]->block_id()) return false;
    }
    return utxo_ == other.utxo_ && frozen_ == other.frozen_;
}

void ChainState::apply_block(Block block, bool unrestricted_coinbase) {
    const std::uint64_t h = block.height;
    auto& txs = block.transactions;
    if (txs.empty() || txs[0].kind != TxKind::Coinbase) {
        throw BlockRejected(ValidationState::invalid(RejectCode::BadCoinbase, "first transaction must be a coinbase"),
                            0);
    }
    if (!txs[0].inputs.empty() || txs[0].coinbase_height != h) {
        throw BlockRejected(ValidationState::invalid(RejectCode::BadCoinbase, "coinbase has inputs or wrong height"),
                            0);
    }
    auto coinbase_total = output_sum(txs[0]);
    if (!coinbase_total) {
        throw BlockRejected(ValidationState::invalid(RejectCode::BadCoinbase, "invalid coinbase output values"), 0);
    }
    // Reward for including evidence is computed from the chain before this block.
    const std::int64_t evidence_reward = evidence::evidence_miner_reward(*this);

    auto shared = std::make_shared<Block>(std::move(block));
    blocks_.push_back(shared);
    const auto& applied = shared->transactions;

    std::vector<std::pair<OutPoint, UtxoEntry>> staged;
    auto stage_outputs = [&](const Transaction& tx, const Hash256& txid) {
        for (std::uint32_t j = 0; j < tx.outputs.size(); ++j) {
            staged.push_back({OutPoint{txid, j}, UtxoEntry{tx.outputs[j], h}});
        }
    };

    std::int64_t fees = 0;
    bool has_evidence = false;
    for (std::size_t i = 0; i < applied.size(); ++i) {
        const Transaction& tx = applied[i];
        const Hash256 txid = tx.txid();
        auto index_tx = [&] {
            if (!tx_index_.emplace(txid, TxLocation{h, i}).second) {
                throw BlockRejected(ValidationState::invalid(RejectCode::MalformedTransaction, "duplicate txid"), i);
            }
        };
        if (i == 0) {
            index_tx();
            stage_outputs(tx, txid);
            continue;
        }
        switch (tx.kind) {
            case TxKind::Coinbase:
                throw BlockRejected(ValidationState::invalid(RejectCode::BadCoinbase, "extra coinbase"), i);
            case TxKind::Standard: {
                auto st = validate_transaction(tx, *this, h);
                if (!st) throw BlockRejected(st, i);
                std::int64_t in_total = 0;
                for (const auto& in : tx.inputs) {
                    in_total += utxo_.at(in.prevout).output.value;
                    utxo_.erase(in.prevout);
                }
                fees += in_total - *output_sum(tx);
                index_tx();
                stage_outputs(tx, txid);
                break;
            }
            case TxKind::Evidence: {
                if (!config_.evidence_consensus) {
                    throw BlockRejected(ValidationState::invalid(RejectCode::EvidenceDisabled, ""), i);
                }
                // Outputs created earlier in this block are subject to the freeze rules too.
                for (auto& [op, entry] : staged) utxo_.insert_or_assign(op, std::move(entry));
                staged.clear();
                auto st = evidence::validate_evidence_tx(tx, *this);
                if (!st) throw BlockRejected(st, i);
                index_tx();
                evidence::apply_evidence_in_place(*this, *tx.evidence, txid, h);
                has_evidence = true;
                break;
            }
            case TxKind::RewardSpend: {
                auto st = evidence::spend_frozen(tx, *this);
                if (!st) throw BlockRejected(st, i);
                frozen_.erase(tx.inputs[0].prevout);
                index_tx();
                stage_outputs(tx, txid);
                break;
            }
        }
    }

    if (!unrestricted_coinbase) {
        std::int64_t allowance = config_.subsidy + fees + (has_evidence ? evidence_reward : 0);
        if (*coinbase_total > allowance) {
            throw BlockRejected(ValidationState::invalid(RejectCode::CoinbaseOverclaim,
                                                         "claimed " + std::to_string(*coinbase_total) +
                                                             ", allowed " + std::to_string(allowance)),
                                0);
        }
    }

    for (auto& [op, entry] : staged) utxo_.insert_or_assign(op, std::move(entry));
    fees_.push_back(fees);
    // Fees move existing value; only the remainder is newly minted.
    issued_ += *coinbase_total - fees;
}

ValidationState validate_transaction(const Transaction& tx, const ChainState& state, std::uint64_t at_height) {
    if (tx.kind != TxKind::Standard) {
        return ValidationState::invalid(RejectCode::MalformedTransaction, "not a standard transaction");
    }
    if (tx.inputs.empty() || tx.outputs.empty()) {
        return ValidationState::invalid(RejectCode::MalformedTransaction, "needs at least one input and output");
    }
    auto out_total = output_sum(tx);
    if (!out_total) return ValidationState::invalid(RejectCode::MalformedTransaction, "invalid output value");

    std::set<OutPoint> seen;
    for (const auto& in : tx.inputs) {
        if (!seen.insert(in.prevout).second) {
            return ValidationState::invalid(RejectCode::DuplicateInput, to_hex(in.prevout.txid));
        }
    }

    const auto& params = state.params();
    const std::uint64_t timeout = state.config().spend_timeout;
    const Bytes msg = sighash(tx);
    std::int64_t in_total = 0;
    for (std::size_t i = 0; i < tx.inputs.size(); ++i) {
        const auto& in = tx.inputs[i];
        auto it = state.utxo().find(in.prevout);
        if (it == state.utxo().end()) {
            return ValidationState::invalid(RejectCode::MissingUtxo,
                                            "input " + std::to_string(i) + " spends an unknown or spent output");
        }
        const UtxoEntry& entry = it->second;
        if (const auto* addr = entry.output.address()) {
            if (crypto::derive_address_hash(in.pubkey, params) != *addr) {
                return ValidationState::invalid(RejectCode::PubkeyHashMismatch, "input " + std::to_string(i));
            }
            if (!crypto::verify(in.pubkey, msg, in.signature, params)) {
                return ValidationState::invalid(RejectCode::BadSignature, "input " + std::to_string(i));
            }
        } else {
            script::ExecContext ctx{msg, params};
            auto res = script::execute(in.script_sig(), std::get<script::Script>(entry.output.lock), ctx);
            if (!res.accepted) {
                return ValidationState::invalid(RejectCode::ScriptFailed,
                                                "input " + std::to_string(i) + ": " +
                                                    std::string(script::to_string(*res.error)));
            }
        }
        std::uint64_t depth = at_height >= entry.height ? at_height - entry.height : 0;
        if (depth < timeout) return ValidationState::timeout(timeout, depth);
        if (add_overflows(in_total, entry.output.value)) {
            return ValidationState::invalid(RejectCode::MalformedTransaction, "input value overflow");
        }
        in_total += entry.output.value;
    }
    if (in_total < *out_total) {
        return ValidationState::invalid(RejectCode::ValueOverspend,
                                        std::to_string(*out_total) + " > " + std::to_string(in_total));
    }
    return ValidationState::ok();
}

ChainState append_block(ChainState state, std::vector<Transaction> txs) {
    state.append_block(std::move(txs));
    return state;
}

Transaction build_transaction(const std::vector<SecretKey>& keys, const std::vector<OutPoint>& sources,
                              const std::vector<Destination>& destinations, const ChainState& state) {
    if (keys.size() != sources.size()) throw BuildError(BuildErrorKind::KeyMismatch, "one key per source required");
    const auto& params = state.params();
    Transaction tx;
    tx.kind = TxKind::Standard;
    std::int64_t in_total = 0;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        auto it = state.utxo().find(sources[i]);
        if (it == state.utxo().end()) throw BuildError(BuildErrorKind::MissingUtxo, "source is not unspent");
        const auto* addr = it->second.output.address();
        PublicKey pk = crypto::derive_pubkey(keys[i], params);
        if (!addr || crypto::derive_address_hash(pk, params) != *addr) {
            throw BuildError(BuildErrorKind::KeyMismatch, "key does not own source " + std::to_string(i));
        }
        in_total += it->second.output.value;
        tx.inputs.push_back(TxInput{sources[i], std::move(pk), {}, {}});
    }
    std::int64_t out_total = 0;
    for (const auto& d : destinations) {
        out_total += d.value;
        tx.outputs.push_back(TxOutput{d.value, d.address});
    }
    if (out_total > in_total) {
        throw BuildError(BuildErrorKind::Overspend,
                         "destinations " + std::to_string(out_total) + " exceed sources " + std::to_string(in_total));
    }
    const Bytes msg = sighash(tx);
    for (std::size_t i = 0; i < keys.size(); ++i) tx.inputs[i].signature = crypto::sign(keys[i], msg, params);
    return tx;
}

std::int64_t total_fees(const Block& block, const ChainState& state) {
    if (block.height < state.block_count() && state.block(block.height).block_id() == block.block_id()) {
        return state.block_fees(block.height);
    }
    std::int64_t fees = 0;
    for (const auto& tx : block.transactions) {
        if (tx.kind != TxKind::Standard) continue;
        std::int64_t in_total = 0;
        for (const auto& in : tx.inputs) {
            auto it = state.utxo().find(in.prevout);
            if (it != state.utxo().end()) in_total += it->second.output.value;
        }
        std::int64_t out_total = 0;
        for (const auto& out : tx.outputs) out_total += out.value;
        fees += in_total - out_total;
    }
    return fees;
}

namespace {

constexpr std::array<std::uint8_t, 4> kChainMagic{'B', 'F', 'S', 'C'};
constexpr std::uint16_t kChainVersion = 1;

}  // namespace

Bytes serialize_chain(const ChainState& state) {
    ByteWriter w;
    w.raw(kChainMagic);
    w.u16(kChainVersion);
    const auto& c = state.config();
    w.u16(static_cast<std::uint16_t>(c.params.secret_bits));
    w.u16(static_cast<std::uint16_t>(c.params.address_bits));
    w.u8(c.params.version_byte);
    w.u8(static_cast<std::uint8_t>(c.params.checksum_len));
    w.u16(static_cast<std::uint16_t>(c.params.digest_bits));
    w.u64(static_cast<std::uint64_t>(c.subsidy));
    w.u32(c.spend_timeout);
    w.u8(c.evidence_consensus ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(state.block_count()));
    for (std::uint64_t h = 0; h < state.block_count(); ++h) w.var_bytes(state.block(h).serialize());
    return std::move(w).take();
}

ChainState deserialize_chain(ByteView data) {
    ByteReader r(data);
    auto magic = r.raw(4);
    if (!std::equal(magic.begin(), magic.end(), kChainMagic.begin())) throw SerializationError("not a chain file");
    if (r.u16() != kChainVersion) throw SerializationError("unsupported chain file version");
    ChainConfig c;
    c.params.secret_bits = r.u16();
    c.params.address_bits = r.u16();
    c.params.version_byte = r.u8();
    c.params.checksum_len = r.u8();
    c.params.digest_bits = r.u16();
    c.subsidy = static_cast<std::int64_t>(r.u64());
    c.spend_timeout = r.u32();
    c.evidence_consensus = r.u8() != 0;
    std::uint32_t n = r.u32();
    ChainState state(c);
    for (std::uint32_t i = 0; i < n; ++i) {
        Bytes raw = r.var_bytes(std::numeric_limits<std::uint32_t>::max());
        Block b = Block::deserialize(raw);
        if (b.height != i) throw SerializationError("block heights are not consecutive");
        if (i == 0) {
            state = ChainState::with_genesis(c, b.transactions.at(0).outputs);
            if (state.tip_id() != b.block_id()) throw SerializationError("genesis block does not match");
            continue;
        }
        if (b.prev_id != state.tip_id()) throw SerializationError("block does not extend the tip");
        state.append_block(std::move(b.transactions));
    }
    if (!r.empty()) throw SerializationError("trailing bytes after chain");
    return state;
}

}  // namespace bfsim::ledger
