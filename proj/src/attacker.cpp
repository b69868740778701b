#include "bfsim/attacker.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <random>
#include <thread>

#include "bfsim/errors.hpp"

namespace bfsim::attacker {

const IndexEntry* AddrIndex::find(const AddressHash& addr) const {
    auto it = entries_.find(addr);
    return it == entries_.end() ? nullptr : &it->second;
}

void AddrIndex::add(const AddressHash& addr, const OutPoint& op, std::int64_t value) {
    auto& e = entries_[addr];
    e.outputs.emplace_back(op, value);
    e.total += value;
}

void AddrIndex::add_unfunded(const AddressHash& addr) { entries_.try_emplace(addr); }

AddrIndex build_addr_index(const ledger::ChainState& state, bool include_published_unfunded) {
    AddrIndex index;
    for (const auto& [op, entry] : state.utxo()) {
        if (const auto* addr = entry.output.address()) index.add(*addr, op, entry.output.value);
    }
    if (include_published_unfunded) {
        for (std::uint64_t h = 0; h < state.block_count(); ++h) {
            for (const auto& tx : state.block(h).transactions) {
                for (const auto& in : tx.inputs) {
                    if (in.pubkey.data.size() == state.params().pubkey_bytes()) {
                        index.add_unfunded(crypto::derive_address_hash(in.pubkey, state.params()));
                    }
                }
            }
        }
    }
    return index;
}

namespace {

struct WorkerResult {
    std::uint64_t trials = 0;
    std::vector<Hit> hits;
};

// Trial counts per worker: the first count % workers workers get one extra.
std::uint64_t share(std::uint64_t count, unsigned workers, unsigned i) {
    return count / workers + (i < count % workers ? 1 : 0);
}

template <typename NextKey>
void run_worker(NextKey next_key, std::uint64_t n, const AddrIndex& index, const ModelParams& params,
                const std::optional<std::uint64_t>& cap, std::atomic<std::uint64_t>& shared_hits,
                WorkerResult& out) {
    for (std::uint64_t t = 0; t < n; ++t) {
        if (cap && shared_hits.load(std::memory_order_relaxed) >= *cap) break;
        SecretKey sk = next_key();
        AddressHash addr = crypto::address_of(sk, params);
        ++out.trials;
        if (const IndexEntry* e = index.find(addr)) {
            Hit hit{std::move(sk), addr, {}};
            for (const auto& [op, value] : e->outputs) hit.outpoints.push_back(op);
            out.hits.push_back(std::move(hit));
            shared_hits.fetch_add(1, std::memory_order_relaxed);
        }
    }
}

}  // namespace

AttackReport search(const AttackConfig& config, const AddrIndex& index, const ModelParams& params) {
    params.validate();
    const unsigned workers = std::max(1u, config.workers);
    std::vector<WorkerResult> results(workers);
    std::atomic<std::uint64_t> shared_hits{0};

    std::uint64_t total = 0;
    if (const auto* seq = std::get_if<SequentialRange>(&config.strategy)) {
        total = seq->count;
        if (seq->count == 0) throw ParamsError("search range is empty");
        std::uint64_t last = seq->start + (seq->count - 1);
        if (last < seq->start || (params.secret_bits < 64 && (last >> params.secret_bits) != 0)) {
            throw ParamsError("search range leaves the key space");
        }
    } else {
        total = std::get<RandomSample>(config.strategy).count;
        if (total == 0) throw ParamsError("sample count must be at least 1");
    }

    auto start_time = std::chrono::steady_clock::now();
    {
        std::vector<std::jthread> threads;
        std::uint64_t offset = 0;
        for (unsigned i = 0; i < workers; ++i) {
            std::uint64_t n = share(total, workers, i);
            if (const auto* seq = std::get_if<SequentialRange>(&config.strategy)) {
                std::uint64_t first = seq->start + offset;
                threads.emplace_back([&, first, n, i] {
                    std::uint64_t next = first;
                    run_worker([&] { return SecretKey::from_u64(next++, params); }, n, index, params,
                               config.stop_after_hits, shared_hits, results[i]);
                });
            } else {
                std::uint64_t seed = std::get<RandomSample>(config.strategy).seed;
                threads.emplace_back([&, seed, n, i] {
                    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), i};
                    std::mt19937_64 rng(seq);
                    run_worker([&] { return crypto::random_key(rng, params); }, n, index, params,
                               config.stop_after_hits, shared_hits, results[i]);
                });
            }
            offset += n;
        }
    }
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();

    AttackReport report;
    report.index_size = index.size();
    for (auto& r : results) {
        report.trials += r.trials;
        std::move(r.hits.begin(), r.hits.end(), std::back_inserter(report.hits));
    }
    std::stable_sort(report.hits.begin(), report.hits.end(),
                     [](const Hit& a, const Hit& b) { return a.key < b.key; });
    report.elapsed = elapsed;
    report.r0 = elapsed > 0 ? static_cast<double>(report.trials) / elapsed : 0.0;
    report.r_empirical = elapsed > 0 ? static_cast<double>(report.hits.size()) / elapsed : 0.0;
    report.r_predicted = predicted_rate(report.index_size, report.r0, params);
    return report;
}

double predicted_rate(std::size_t index_size, double r0, const ModelParams& params) {
    return std::ldexp(static_cast<double>(index_size), -params.address_bits) * r0;
}

ledger::Transaction craft_stealing_tx(const SecretKey& sk, std::span<const OutPoint> outpoints,
                                      const AddressHash& adversary, const ledger::ChainState& state,
                                      std::int64_t fee) {
    std::int64_t total = 0;
    for (const auto& op : outpoints) {
        auto it = state.utxo().find(op);
        if (it == state.utxo().end()) {
            throw ledger::BuildError(ledger::BuildErrorKind::MissingUtxo, "stealing source is not unspent");
        }
        total += it->second.output.value;
    }
    std::vector<SecretKey> keys(outpoints.size(), sk);
    std::vector<OutPoint> sources(outpoints.begin(), outpoints.end());
    return ledger::build_transaction(keys, sources, {ledger::Destination{adversary, total - fee}}, state);
}

nlohmann::json AttackReport::to_json() const {
    nlohmann::json keys = nlohmann::json::array();
    for (const auto& h : hits) keys.push_back(h.key.hex());
    return {
        {"trials", trials},
        {"hits", hits.size()},
        {"index_size", index_size},
        {"elapsed", elapsed},
        {"r0", r0},
        {"r_empirical", r_empirical},
        {"r_predicted", r_predicted},
        {"hit_keys", keys},
    };
}

std::string hit_log_lines(const AttackReport& report) {
    std::string out;
    for (const auto& h : report.hits) out += h.key.hex() + " " + h.address.hex() + "\n";
    return out;
}

}  // namespace bfsim::attacker
