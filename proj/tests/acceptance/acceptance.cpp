// One PASS/FAIL line per acceptance criterion. Optional arguments select
// criteria by number. Exit status is non-zero when any selected one fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "bfsim/analysis.hpp"
#include "bfsim/attacker.hpp"
#include "bfsim/scenario.hpp"
#include "bfsim/script.hpp"
#include "helpers.hpp"

using namespace bfsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

unsigned hw_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

ModelParams params(int bsec, int baddr, int digest = 32) {
    ModelParams p;
    p.secret_bits = bsec;
    p.address_bits = baddr;
    p.digest_bits = digest;
    return p;
}

Outcome full_scale_bound() {
    auto b = analysis::epsilon_bound(params(256, 160), 0.36L);
    const long double target = 5.22L * std::ldexp(1.0L, -96);
    const long double rel = std::fabs(b.bound - target) / target;
    const bool ok = rel <= 0.005L && b.bound < 7e-29L && b.bound < 1e-28L;
    return {ok, "bound=" + fmt(static_cast<double>(b.bound)) + " rel_err_vs_5.22*2^-96=" + fmt(static_cast<double>(rel))};
}

Outcome k_extremum() {
    auto opt = analysis::optimize_k(params(256, 160));
    bool ok = std::fabs(opt.k - 0.36L) <= 0.01L;
    for (long double k : {0.2L, 0.3L, 0.36L, 0.4L, 0.5L}) ok = ok && opt.coefficient <= analysis::bound_coefficient(k);
    return {ok, "k*=" + fmt(static_cast<double>(opt.k), 6) + " f(k*)=" + fmt(static_cast<double>(opt.coefficient), 7)};
}

Outcome bound_dominates_exact() {
    bool ok = true;
    std::string detail;
    for (auto [s, a] : {std::pair{12, 4}, {16, 8}, {20, 8}}) {
        auto p = params(s, a);
        const long double exact = analysis::epsilon_exact(p, hw_workers());
        const long double bound = analysis::epsilon_bound(p, 0.36L).bound;
        ok = ok && exact <= bound;
        detail += "(" + std::to_string(s) + "," + std::to_string(a) + "): exact=" + fmt(static_cast<double>(exact)) +
                  " bound=" + fmt(static_cast<double>(bound)) + "; ";
    }
    return {ok, detail};
}

Outcome evidence_probability() {
    const std::uint64_t trials = 10000;
    auto r = analysis::monte_carlo_evidence(params(32, 16), trials, 2024, hw_workers());
    const bool ok = r.same_key <= 3 && r.evidence_ok + r.same_key == trials;
    return {ok, "same_key=" + std::to_string(r.same_key) + " evidence_ok=" + std::to_string(r.evidence_ok) + "/" +
                    std::to_string(trials)};
}

// Random funded addresses, all distinct.
attacker::AddrIndex synthetic_index(const ModelParams& p, std::size_t n, std::uint64_t seed) {
    attacker::AddrIndex index;
    std::uint64_t s = seed;
    while (index.size() < n) {
        index.add(crypto::address_of(crypto::keygen(s++, p), p), ledger::OutPoint{}, 1);
    }
    return index;
}

// Addresses are uniform for any digest width; 8 bits keeps derivations cheap.
Outcome attack_rate_law() {
    const auto p = params(32, 20, 8);
    const int runs = 30;
    const std::uint64_t trials = 1'000'000;
    std::uint64_t hits[2] = {0, 0};
    const std::size_t sizes[2] = {64, 128};
    for (int which = 0; which < 2; ++which) {
        for (int run = 0; run < runs; ++run) {
            auto index = synthetic_index(p, sizes[which], 1'000'000ULL * (which + 1) + 1000ULL * run);
            attacker::AttackConfig cfg;
            cfg.strategy = attacker::RandomSample{scenario::derive_seed(77, "rate", which * runs + run), trials};
            cfg.workers = hw_workers();
            auto r = attacker::search(cfg, index, p);
            hits[which] += r.hits.size();
        }
    }
    const double n = static_cast<double>(runs) * trials;
    const double q64 = 64.0 / (1 << 20);
    const double mean64 = n * q64;
    const double sd64 = std::sqrt(n * q64 * (1 - q64));
    const bool law = std::fabs(static_cast<double>(hits[0]) - mean64) <= 3 * sd64;

    // hits128 - 2 hits64 has mean 0 under the rate law.
    const double q128 = 2 * q64;
    const double sd_diff = std::sqrt(n * q128 * (1 - q128) + 4 * n * q64 * (1 - q64));
    const double diff = static_cast<double>(hits[1]) - 2.0 * static_cast<double>(hits[0]);
    const bool doubling = std::fabs(diff) <= 3 * sd_diff;
    return {law && doubling, "hits64=" + std::to_string(hits[0]) + " expected=" + fmt(mean64) + " sd=" + fmt(sd64) +
                                 " hits128=" + std::to_string(hits[1]) + " ratio=" +
                                 fmt(static_cast<double>(hits[1]) / static_cast<double>(hits[0])) +
                                 " diff/sd=" + fmt(diff / sd_diff)};
}

Outcome preimage_distribution() {
    const std::uint64_t samples = 1u << 16;
    auto s = analysis::preimage_distribution(params(32, 8), samples, 99);
    // Standard error of the per-address mean.
    const double se = std::sqrt(s.variance / static_cast<double>(s.counts.size()));
    const bool mean_ok = std::fabs(s.mean - 256.0) <= 3 * std::max(se, 1e-12);
    const bool var_ok = std::fabs(s.variance - s.binomial_variance) <= 0.2 * s.binomial_variance;
    return {mean_ok && var_ok, "mean=" + fmt(s.mean, 6) + " se=" + fmt(se) + " variance=" + fmt(s.variance) +
                                   " binomial=" + fmt(s.binomial_variance)};
}

Outcome consensus_suite() {
    using namespace ledger;
    const auto p = testutil::small_params(24, 8, 8);
    const auto victim = crypto::keygen(10, p);
    const auto thief = testutil::find_collision(victim, p);
    const auto victim_addr = crypto::address_of(victim, p);
    auto other_key = [&](std::uint64_t seed) {
        while (crypto::address_of(crypto::keygen(seed, p), p) == victim_addr) ++seed;
        return crypto::keygen(seed, p);
    };
    const auto own = other_key(11);
    const auto loot_addr = crypto::address_of(other_key(100), p);
    const auto miner = crypto::address_of(other_key(70), p);

    auto chain = ChainState::with_genesis(testutil::config_for(p),
                                          {{100, victim_addr}, {40, victim_addr}, {30, crypto::address_of(own, p)}});
    const Hash256 g = chain.block(0).transactions[0].txid();
    testutil::mine_to(chain, miner, 6);

    // Theft, second theft, evidence. The first theft also spends the thief's own output.
    auto t1 = build_transaction({thief, own}, {{g, 0}, {g, 2}}, {{loot_addr, 125}}, chain);
    auto t2 = build_transaction({thief}, {{g, 1}}, {{loot_addr, 38}}, chain);
    testutil::mine(chain, miner, {t1});
    testutil::mine(chain, miner, {t2});

    auto ev = evidence::make_evidence(victim, chain);
    testutil::mine(chain, miner, {make_evidence_tx(ev)});
    const Hash256 ev_txid = chain.evidence_effects().back().evidence_txid;

    std::string detail;
    const bool a = chain.utxo().count({t1.txid(), 0}) == 0 && chain.utxo().count({t2.txid(), 0}) == 0;
    detail += std::string("a:") + (a ? "ok" : "loot present");

    auto co = chain.utxo().find({g, 2});
    const bool b = co != chain.utxo().end() && co->second.height == 0 && co->second.output.value == 30;
    detail += std::string(" b:") + (b ? "ok" : "co-input missing");

    const auto frozen_it = chain.frozen().find({ev_txid, 0});
    const std::int64_t expected_frozen = (100 + 40) + (5 + 2);
    const bool c = chain.frozen().size() == 1 && frozen_it != chain.frozen().end() &&
                   frozen_it->second.value == expected_frozen;
    detail += " c:frozen=" + (frozen_it == chain.frozen().end() ? std::string("none")
                                                                 : std::to_string(frozen_it->second.value)) +
              " expected=" + std::to_string(expected_frozen);

    const auto aux = crypto::address_of(evidence::auxiliary_key(victim, p), p);
    const OutPoint fop{ev_txid, 0};
    auto wrong_dest = evidence::build_frozen_spend(thief, fop, loot_addr, chain);
    auto wrong_key = evidence::build_frozen_spend(victim, fop, aux, chain);
    auto wrong_key2 = evidence::build_frozen_spend(own, fop, aux, chain);
    auto good = evidence::build_frozen_spend(thief, fop, aux, chain);
    const bool d_rejects = evidence::spend_frozen(wrong_dest, chain).code() == RejectCode::WrongDestination &&
                           evidence::spend_frozen(wrong_key, chain).code() == RejectCode::BadSignature &&
                           evidence::spend_frozen(wrong_key2, chain).code() == RejectCode::BadSignature;
    bool d_accept = false;
    try {
        testutil::mine(chain, miner, {good});
        d_accept = chain.frozen().empty() && chain.utxo().at({good.txid(), 0}).output.value == expected_frozen;
    } catch (const BlockRejected&) {
    }
    detail += std::string(" d:") + (d_rejects && d_accept ? "ok" : "frozen spend rules violated");
    const bool conserved = chain.utxo_value() + chain.frozen_value() == chain.issued() + chain.evidence_delta();
    return {a && b && c && d_rejects && d_accept && conserved, detail};
}

Outcome timeout_boundary() {
    using namespace ledger;
    const auto p = testutil::small_params(24, 16, 8);
    const auto owner = crypto::keygen(1, p);
    const auto miner = crypto::address_of(crypto::keygen(2, p), p);
    auto chain = ChainState::with_genesis(testutil::config_for(p), {{10, crypto::address_of(owner, p)}});
    const OutPoint src{chain.block(0).transactions[0].txid(), 0};
    auto tx = build_transaction({owner}, {src}, {{miner, 9}}, chain);

    testutil::mine_to(chain, miner, 5);
    auto at5 = validate_transaction(tx, chain, 5);
    bool block5_rejected = false;
    try {
        testutil::mine(chain, miner, {tx});
    } catch (const BlockRejected& e) {
        block5_rejected = e.state().code() == RejectCode::TimeoutNotElapsed;
    }
    testutil::mine(chain, miner);
    auto at6 = validate_transaction(tx, chain, 6);
    bool block6_accepted = false;
    try {
        testutil::mine(chain, miner, {tx});
        block6_accepted = chain.utxo().count(src) == 0;
    } catch (const BlockRejected&) {
    }
    const bool ok = at5.code() == RejectCode::TimeoutNotElapsed && at5.actual_depth() == 5 && block5_rejected &&
                    at6.is_valid() && block6_accepted;
    return {ok, "depth5=" + at5.to_string() + " depth6=" + (at6.is_valid() ? std::string("ok") : at6.to_string())};
}

Outcome reward_truth_table() {
    const auto p = params(32, 16);
    const auto victim = crypto::keygen(31337, p);
    attacker::AddrIndex index;
    index.add(crypto::address_of(victim, p), {}, 1);
    attacker::AttackConfig cfg;
    cfg.strategy = attacker::RandomSample{scenario::derive_seed(5, "truth-table"), std::uint64_t{1} << 24};
    cfg.stop_after_hits = 1;
    auto r = attacker::search(cfg, index, p);
    if (r.hits.empty() || r.hits.front().key == victim) return {false, "no colliding key found"};
    const auto collider = r.hits.front().key;
    const auto unrelated = crypto::keygen(4242, p);
    if (crypto::address_of(unrelated, p) == crypto::address_of(victim, p)) return {false, "unlucky unrelated key"};

    const auto pv = crypto::derive_pubkey(victim, p);
    const auto pc = crypto::derive_pubkey(collider, p);
    const auto pu = crypto::derive_pubkey(unrelated, p);
    const Bytes msg{'r', 'e', 'w', 'a', 'r', 'd'};
    const Bytes other_msg{'o', 't', 'h', 'e', 'r'};
    const auto script = script::reward_script_template();

    struct Cell {
        const char* pk;
        const char* hash;
        const char* sig;
        crypto::PublicKey second;
        bool valid_sig;
    };
    // Equal public keys always have equal hashes, so the (equal, unequal) cells
    // cannot be constructed.
    const std::vector<Cell> cells{
        {"unequal", "equal", "valid", pc, true},     {"unequal", "equal", "invalid", pc, false},
        {"unequal", "unequal", "valid", pu, true},   {"unequal", "unequal", "invalid", pu, false},
        {"equal", "equal", "valid", pv, true},       {"equal", "equal", "invalid", pv, false},
    };
    bool ok = true;
    std::string detail = "collider_trials=" + std::to_string(r.trials) + ";";
    for (const auto& c : cells) {
        auto sig = crypto::sign(victim, c.valid_sig ? msg : other_msg, p);
        auto res = script::execute(script::push_only({sig.data, pv.data, c.second.data}), script, {msg, p});
        const bool expect = std::string(c.pk) == "unequal" && std::string(c.hash) == "equal" && c.valid_sig;
        ok = ok && res.accepted == expect;
        if (expect) ok = ok && res.trace.size() == 13;
        detail += std::string(" ") + c.pk + "/" + c.hash + "/" + c.sig + "=" + (res.accepted ? "accept" : "reject");
    }
    detail += "; pk-equal/hash-unequal cells unrealizable";
    return {ok, detail};
}

Outcome script_vs_native() {
    using namespace ledger;
    const auto p = testutil::small_params(24, 16, 8);
    std::mt19937_64 rng(12345);
    std::vector<SecretKey> keys;
    std::vector<TxOutput> funding;
    for (std::uint64_t i = 0; i < 40; ++i) {
        keys.push_back(crypto::keygen(500 + i, p));
        funding.push_back({1000, crypto::address_of(keys.back(), p)});
    }
    auto chain = ChainState::with_genesis(testutil::config_for(p), funding);
    const Hash256 g = chain.block(0).transactions[0].txid();
    testutil::mine_to(chain, crypto::address_of(crypto::keygen(1, p), p), 6);

    std::size_t agree = 0, accepted = 0;
    const std::size_t total = 1000;
    for (std::size_t n = 0; n < total; ++n) {
        std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(keys.size() - 1));
        const std::uint32_t n_inputs = 1 + static_cast<std::uint32_t>(rng() % 2);
        std::set<std::uint32_t> chosen;
        while (chosen.size() < n_inputs) chosen.insert(pick(rng));
        std::vector<SecretKey> signers;
        std::vector<OutPoint> sources;
        for (auto i : chosen) {
            signers.push_back(keys[i]);
            sources.push_back({g, i});
        }
        auto tx = build_transaction(signers, sources, {{*funding[0].address(), static_cast<std::int64_t>(n_inputs) * 1000 - 3}},
                                    chain);
        const std::size_t victim_input = rng() % tx.inputs.size();
        auto& in = tx.inputs[victim_input];
        switch (rng() % 6) {
            case 0: break;
            case 1: in.signature.data[rng() % in.signature.data.size()] ^= 0x01; break;
            case 2: in.pubkey = crypto::derive_pubkey(keys[pick(rng)], p); break;
            case 3: tx.outputs[0].value -= 1; break;  // invalidates every signature
            case 4: in.signature = crypto::sign(keys[pick(rng)], sighash(tx), p); break;
            case 5: in.signature.data.resize(rng() % in.signature.data.size()); break;
        }
        const bool native = validate_transaction(tx, chain, chain.next_height()).is_valid();
        bool via_script = true;
        const Bytes msg = sighash(tx);
        for (const auto& input : tx.inputs) {
            const auto& out = chain.utxo().at(input.prevout).output;
            auto lock = script::p2pkh_script_template(*out.address(), p);
            via_script = via_script && script::execute(input.script_sig(), lock, {msg, p}).accepted;
        }
        agree += native == via_script;
        accepted += native;
    }
    return {agree == total, "agree=" + std::to_string(agree) + "/" + std::to_string(total) +
                                " accepted=" + std::to_string(accepted)};
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const fs::path work = fs::temp_directory_path() / ("bfsim_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(work);
    fs::create_directories(work);
    {
        std::ofstream cfg(work / "desk.ini");
        cfg << "[params]\nsecret_bits=32\naddress_bits=16\n[funding]\ncount=64\nvalue=100\n[reward]\nvalue=250\n";
    }
    double slowest = 0;
    std::string reports[2];
    for (int i = 0; i < 2; ++i) {
        const fs::path out = work / ("run" + std::to_string(i));
        const std::string cmd = std::string("\"") + BFSIM_CLI_PATH + "\" simulate --config \"" +
                                (work / "desk.ini").string() + "\" --seed 20240601 --out \"" + out.string() +
                                "\" > /dev/null";
        const auto t0 = std::chrono::steady_clock::now();
        const int rc = std::system(cmd.c_str());
        slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        if (rc != 0) return {false, "simulate exited with status " + std::to_string(rc)};
        reports[i] = slurp(out / "report.json");
    }
    const bool same = !reports[0].empty() && reports[0] == reports[1];
    const bool found = reports[0].find("\"evidence_found\": true") != std::string::npos;
    fs::remove_all(work);
    return {same && slowest < 60.0, std::string("identical=") + (same ? "yes" : "no") + " bytes=" +
                                        std::to_string(reports[0].size()) + " evidence_found=" +
                                        (found ? "true" : "false") + " slowest_run=" + fmt(slowest) + "s"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"full-scale bound reproduction", full_scale_bound},
        {"k extremum", k_extremum},
        {"bound dominates exact epsilon", bound_dominates_exact},
        {"evidence probability at desk scale", evidence_probability},
        {"attack rate law", attack_rate_law},
        {"preimage distribution", preimage_distribution},
        {"consensus scenario suite", consensus_suite},
        {"timeout boundary", timeout_boundary},
        {"reward script truth table", reward_truth_table},
        {"script engine agrees with native P2PKH", script_vs_native},
        {"simulate determinism", determinism},
    };

    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i + 1);
        if (!selected.empty() && !selected.count(number)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << number << " (" << criteria[i].first
                  << ") [" << fmt(secs, 3) << "s] " << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
