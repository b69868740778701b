#include <doctest.h>

#include "bfsim/errors.hpp"
#include "helpers.hpp"

using namespace bfsim;
using namespace bfsim::ledger;
using testutil::mine;
using testutil::mine_to;

namespace {

struct Fixture {
    ModelParams p = testutil::small_params(24, 16, 8);
    SecretKey alice = crypto::keygen(1, p);
    SecretKey bob = crypto::keygen(2, p);
    SecretKey miner_key = crypto::keygen(3, p);
    AddressHash a = crypto::address_of(alice, p);
    AddressHash b = crypto::address_of(bob, p);
    AddressHash miner = crypto::address_of(miner_key, p);
    ChainState chain = ChainState::with_genesis(testutil::config_for(p), {{100, a}, {70, a}, {30, b}});
    Hash256 genesis = chain.block(0).transactions[0].txid();

    OutPoint out(std::uint32_t i) const { return {genesis, i}; }
};

std::optional<RejectCode> reject_code(const Transaction& tx, const ChainState& c, std::uint64_t h) {
    return validate_transaction(tx, c, h).code();
}

}  // namespace

TEST_CASE("genesis funds the allocations") {
    Fixture f;
    CHECK(f.chain.height() == 0);
    CHECK(f.chain.utxo().size() == 3);
    CHECK(f.chain.utxo_value() == 200);
    CHECK(f.chain.issued() == 200);
    CHECK(f.chain.utxo().at(f.out(0)).height == 0);
}

TEST_CASE("spend timeout boundary") {
    Fixture f;
    auto tx = build_transaction({f.alice}, {f.out(0)}, {{f.b, 99}}, f.chain);

    auto early = validate_transaction(tx, f.chain, 5);
    CHECK(early.code() == RejectCode::TimeoutNotElapsed);
    CHECK(early.needed_depth() == 6);
    CHECK(early.actual_depth() == 5);
    CHECK(validate_transaction(tx, f.chain, 6).is_valid());

    mine_to(f.chain, f.miner, 5);
    CHECK_THROWS_AS(mine(f.chain, f.miner, {tx}), BlockRejected);
    CHECK(f.chain.next_height() == 5);
    mine(f.chain, f.miner);
    mine(f.chain, f.miner, {tx});
    CHECK(f.chain.utxo().count(f.out(0)) == 0);
    CHECK(f.chain.utxo().at({tx.txid(), 0}).height == 6);
    CHECK(f.chain.block_fees(6) == 1);
}

TEST_CASE("outputs created in a block are not spendable in the same block") {
    Fixture f;
    auto cfg = testutil::config_for(f.p);
    cfg.spend_timeout = 0;
    auto chain = ChainState::with_genesis(cfg, {{100, f.a}});
    auto t1 = build_transaction({f.alice}, {{chain.block(0).transactions[0].txid(), 0}}, {{f.b, 100}}, chain);
    Transaction t2;
    t2.inputs.push_back({{t1.txid(), 0}, crypto::derive_pubkey(f.bob, f.p), {}, {}});
    t2.outputs.push_back({100, f.a});
    t2.inputs[0].signature = crypto::sign(f.bob, sighash(t2), f.p);
    try {
        chain.append_block({make_coinbase(1, {{50, f.miner}}), t1, t2});
        FAIL("same-block spend accepted");
    } catch (const BlockRejected& e) {
        CHECK(e.state().code() == RejectCode::MissingUtxo);
        CHECK(e.tx_index() == 2);
    }
    mine(chain, f.miner, {t1});
    mine(chain, f.miner, {t2});
    CHECK(chain.utxo().count({t2.txid(), 0}) == 1);
}

TEST_CASE("transaction rejection codes") {
    Fixture f;
    const std::uint64_t h = 6;

    auto good = build_transaction({f.alice}, {f.out(0)}, {{f.b, 90}}, f.chain);
    CHECK(validate_transaction(good, f.chain, h).is_valid());

    auto bad_sig = good;
    bad_sig.outputs[0].value = 91;
    CHECK(reject_code(bad_sig, f.chain, h) == RejectCode::BadSignature);

    auto wrong_key = good;
    wrong_key.inputs[0].pubkey = crypto::derive_pubkey(f.bob, f.p);
    CHECK(reject_code(wrong_key, f.chain, h) == RejectCode::PubkeyHashMismatch);

    Transaction over;
    over.inputs.push_back({f.out(2), crypto::derive_pubkey(f.bob, f.p), {}, {}});
    over.outputs.push_back({31, f.a});
    over.inputs[0].signature = crypto::sign(f.bob, sighash(over), f.p);
    CHECK(reject_code(over, f.chain, h) == RejectCode::ValueOverspend);

    Transaction dup;
    for (int i = 0; i < 2; ++i) dup.inputs.push_back({f.out(2), crypto::derive_pubkey(f.bob, f.p), {}, {}});
    dup.outputs.push_back({10, f.a});
    for (auto& in : dup.inputs) in.signature = crypto::sign(f.bob, sighash(dup), f.p);
    CHECK(reject_code(dup, f.chain, h) == RejectCode::DuplicateInput);

    auto missing = good;
    missing.inputs[0].prevout.index = 9;
    CHECK(reject_code(missing, f.chain, h) == RejectCode::MissingUtxo);

    Transaction empty;
    CHECK(reject_code(empty, f.chain, h) == RejectCode::MalformedTransaction);

    auto negative = good;
    negative.outputs[0].value = -1;
    CHECK(reject_code(negative, f.chain, h) == RejectCode::MalformedTransaction);
}

TEST_CASE("double spend across blocks") {
    Fixture f;
    mine_to(f.chain, f.miner, 6);
    auto t1 = build_transaction({f.alice}, {f.out(0)}, {{f.b, 100}}, f.chain);
    auto t2 = build_transaction({f.alice}, {f.out(0)}, {{f.a, 99}}, f.chain);
    mine(f.chain, f.miner, {t1});
    auto st = validate_transaction(t2, f.chain, f.chain.next_height());
    CHECK(st.code() == RejectCode::MissingUtxo);
}

TEST_CASE("coinbase rules and atomic block application") {
    Fixture f;
    mine_to(f.chain, f.miner, 6);
    auto tx = build_transaction({f.alice}, {f.out(0)}, {{f.b, 95}}, f.chain);
    const ChainState before = f.chain;

    auto over = make_coinbase(6, {{56, f.miner}});
    try {
        f.chain.append_block({over, tx});
        FAIL("overclaiming coinbase accepted");
    } catch (const BlockRejected& e) {
        CHECK(e.state().code() == RejectCode::CoinbaseOverclaim);
    }
    CHECK(f.chain == before);
    CHECK(f.chain.utxo_value() == before.utxo_value());

    CHECK_THROWS_AS(f.chain.append_block({tx}), BlockRejected);
    CHECK_THROWS_AS(f.chain.append_block({make_coinbase(6, {{1, f.miner}}), make_coinbase(6, {{1, f.miner}})}),
                    BlockRejected);

    f.chain.append_block({make_coinbase(6, {{55, f.miner}}), tx});
    CHECK(f.chain.block_fees(6) == 5);
    CHECK(f.chain.utxo_value() + 0 == f.chain.issued());
}

TEST_CASE("functional append leaves the input state alone") {
    Fixture f;
    auto next = append_block(f.chain, {make_coinbase(1, {{50, f.miner}})});
    CHECK(next.height() == 1);
    CHECK(f.chain.height() == 0);
}

TEST_CASE("builder errors") {
    Fixture f;
    auto kind = [&](auto&& fn) {
        try {
            fn();
        } catch (const BuildError& e) {
            return e.kind();
        }
        FAIL("no error");
        return BuildErrorKind::KeyMismatch;
    };
    CHECK(kind([&] { build_transaction({f.bob}, {f.out(0)}, {{f.b, 1}}, f.chain); }) == BuildErrorKind::KeyMismatch);
    CHECK(kind([&] { build_transaction({f.alice}, {f.out(7)}, {{f.b, 1}}, f.chain); }) == BuildErrorKind::MissingUtxo);
    CHECK(kind([&] { build_transaction({f.alice}, {f.out(0)}, {{f.b, 101}}, f.chain); }) == BuildErrorKind::Overspend);
    CHECK(kind([&] { build_transaction({}, {f.out(0)}, {{f.b, 1}}, f.chain); }) == BuildErrorKind::KeyMismatch);
}

TEST_CASE("serialization round trips") {
    Fixture f;
    mine_to(f.chain, f.miner, 6);
    auto tx = build_transaction({f.alice, f.alice}, {f.out(0), f.out(1)}, {{f.b, 150}, {f.a, 10}}, f.chain);
    Bytes raw = tx.serialize();
    ByteReader r(raw);
    CHECK(Transaction::deserialize(r) == tx);
    CHECK(r.empty());

    auto resigned = tx;
    resigned.inputs[0].signature = crypto::sign(f.bob, sighash(tx), f.p);
    CHECK(sighash(resigned) == sighash(tx));
    CHECK(resigned.txid() != tx.txid());

    mine(f.chain, f.miner, {tx});
    Bytes block_raw = f.chain.block(6).serialize();
    CHECK(Block::deserialize(block_raw).block_id() == f.chain.block(6).block_id());

    Bytes chain_raw = serialize_chain(f.chain);
    ChainState copy = deserialize_chain(chain_raw);
    CHECK(copy == f.chain);
    CHECK(copy.issued() == f.chain.issued());
    CHECK(serialize_chain(copy) == chain_raw);

    chain_raw[0] = 'X';
    CHECK_THROWS_AS(deserialize_chain(chain_raw), SerializationError);
    Bytes truncated(chain_raw.begin(), chain_raw.end() - 3);
    truncated[0] = 'B';
    CHECK_THROWS_AS(deserialize_chain(truncated), SerializationError);
}

TEST_CASE("value accounting without evidence") {
    Fixture f;
    mine_to(f.chain, f.miner, 6);
    auto tx = build_transaction({f.alice}, {f.out(0)}, {{f.b, 90}}, f.chain);
    mine(f.chain, f.miner, {tx});
    CHECK(f.chain.utxo_value() == f.chain.issued());
    CHECK(f.chain.issued() == 200 + 6 * 50);
}

TEST_CASE("sighash ignores signatures and commits to values") {
    Fixture f;
    auto tx = build_transaction({f.alice}, {f.out(0)}, {{f.b, 90}}, f.chain);
    auto unsigned_tx = tx;
    unsigned_tx.inputs[0].signature = {};
    CHECK(sighash(unsigned_tx) == sighash(tx));
    CHECK(sighash(tx) == sighash(tx));
    auto bumped = tx;
    bumped.outputs[0].value += 1;
    CHECK(sighash(bumped) != sighash(tx));
}

TEST_CASE("total fees per block") {
    Fixture f;
    mine_to(f.chain, f.miner, 6);
    Block empty{f.chain.next_height(), f.chain.tip_id(), {make_coinbase(f.chain.next_height(), {{50, f.miner}})}};
    CHECK(total_fees(empty, f.chain) == 0);

    auto t1 = build_transaction({f.alice}, {f.out(0)}, {{f.b, 97}}, f.chain);
    auto t2 = build_transaction({f.alice}, {f.out(1)}, {{f.b, 63}}, f.chain);
    Block two{f.chain.next_height(), f.chain.tip_id(), {make_coinbase(f.chain.next_height(), {{60, f.miner}}), t1, t2}};
    CHECK(total_fees(two, f.chain) == 10);
    mine(f.chain, f.miner, {t1, t2});
    CHECK(f.chain.block_fees(6) == 10);
}

TEST_CASE("replaying the blocks rebuilds the same state") {
    Fixture f;
    mine_to(f.chain, f.miner, 6);
    mine(f.chain, f.miner, {build_transaction({f.alice}, {f.out(0)}, {{f.b, 95}}, f.chain)});
    mine_to(f.chain, f.miner, 13);
    mine(f.chain, f.miner, {build_transaction({f.bob}, {f.out(2)}, {{f.a, 30}}, f.chain)});

    ChainState again = ChainState::with_genesis(testutil::config_for(f.p), {{100, f.a}, {70, f.a}, {30, f.b}});
    for (std::uint64_t h = 1; h < f.chain.next_height(); ++h) again.append_block(f.chain.block(h).transactions);
    CHECK(again == f.chain);
    CHECK(again.utxo() == f.chain.utxo());
}
