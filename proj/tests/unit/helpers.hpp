#pragma once

#include <vector>

#include "bfsim/crypto.hpp"
#include "bfsim/evidence.hpp"
#include "bfsim/ledger.hpp"

namespace testutil {

using namespace bfsim;

// Small digest keeps signing cheap in tests.
inline ModelParams small_params(int bsec = 24, int baddr = 8, int digest = 8) {
    ModelParams p;
    p.secret_bits = bsec;
    p.address_bits = baddr;
    p.digest_bits = digest;
    return p;
}

inline ledger::ChainConfig config_for(const ModelParams& p, bool evidence = true) {
    ledger::ChainConfig c;
    c.params = p;
    c.evidence_consensus = evidence;
    return c;
}

// Appends a block whose coinbase claims everything it is allowed.
inline void mine(ledger::ChainState& chain, const crypto::AddressHash& miner,
                 std::vector<ledger::Transaction> body = {}) {
    ledger::Block candidate{chain.next_height(), chain.tip_id(), body};
    std::int64_t amount = chain.config().subsidy + ledger::total_fees(candidate, chain);
    for (const auto& tx : body) {
        if (tx.kind == ledger::TxKind::Evidence) {
            amount += evidence::evidence_miner_reward(chain);
            break;
        }
    }
    std::vector<ledger::Transaction> txs{ledger::make_coinbase(chain.next_height(), {{amount, miner}})};
    for (auto& tx : body) txs.push_back(std::move(tx));
    chain.append_block(std::move(txs));
}

inline void mine_to(ledger::ChainState& chain, const crypto::AddressHash& miner, std::uint64_t next_height) {
    while (chain.next_height() < next_height) mine(chain, miner);
}

// Another key with the same address as `victim`, found by counting up from `start`.
inline crypto::SecretKey find_collision(const crypto::SecretKey& victim, const ModelParams& p,
                                        std::uint64_t start = 0) {
    const auto target = crypto::address_of(victim, p);
    for (std::uint64_t v = start;; ++v) {
        auto sk = crypto::SecretKey::from_u64(v, p);
        if (sk != victim && crypto::address_of(sk, p) == target) return sk;
    }
}

}  // namespace testutil
