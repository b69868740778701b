#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bfsim/analysis.hpp"
#include "bfsim/crypto.hpp"
#include "bfsim/scenario.hpp"
#include "bfsim/script.hpp"

namespace fs = std::filesystem;
using namespace bfsim;
using nlohmann::json;

namespace {

constexpr int kExitReject = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInvariant = 3;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw scenario::ConfigError("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& path, std::string_view data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    int bsec = ModelParams{}.secret_bits;
    int baddr = ModelParams{}.address_bits;
    int digest_bits = ModelParams{}.digest_bits;
    bool exact = false;
    std::uint64_t mc_trials = 0;
    unsigned workers = 1;
    std::string out;
    std::string script_file;
    std::string witness_file;
    std::string chain_file;
    std::string message = "00";
};

ModelParams cli_params(const Options& o) {
    ModelParams p;
    p.secret_bits = o.bsec;
    p.address_bits = o.baddr;
    p.digest_bits = o.digest_bits;
    p.validate();
    return p;
}

int cmd_simulate(const Options& o) {
    scenario::ScenarioConfig cfg;
    if (!o.config.empty()) cfg = scenario::parse_config(read_file(o.config));
    if (o.seed) cfg.seed = *o.seed;
    auto result = scenario::run_simulation(cfg);

    const std::string report = dump(result.report);
    std::cout << report;
    if (!o.out.empty()) {
        fs::path dir(o.out);
        fs::create_directories(dir);
        write_file(dir / "report.json", report);
        write_file(dir / "attack_timing.json", dump(result.timing));
        write_file(dir / "state.json", dump(scenario::state_dump(result.chain)));
        Bytes chain = ledger::serialize_chain(result.chain);
        write_file(dir / "chain.bin", std::string_view(reinterpret_cast<const char*>(chain.data()), chain.size()));
        write_file(dir / "victim_keys.txt", result.artifacts.victim_keys);
        write_file(dir / "hits.log", result.artifacts.hit_log);
        if (!result.artifacts.reward_script.empty()) {
            write_file(dir / "reward.script", result.artifacts.reward_script);
            write_file(dir / "reward_witness.txt", result.artifacts.reward_witness);
            write_file(dir / "reward_witness_adversary.txt", result.artifacts.reward_witness_adversary);
        }
    }
    if (result.violation) {
        std::cerr << "invariant violated: " << *result.violation << "\n";
        return kExitInvariant;
    }
    return 0;
}

int cmd_analyze(const Options& o) {
    const ModelParams p = cli_params(o);
    json out;
    out["params"] = {{"secret_bits", p.secret_bits}, {"address_bits", p.address_bits}};

    const auto b = analysis::epsilon_bound(p, 0.36L);
    out["bound_k036"] = {{"k", 0.36},
                         {"n0", static_cast<double>(b.n0)},
                         {"term_cdf", static_cast<double>(b.term_cdf)},
                         {"term_inv", static_cast<double>(b.term_inv)},
                         {"bound", static_cast<double>(b.bound)}};
    const auto opt = analysis::optimize_k(p);
    out["optimum"] = {{"k", static_cast<double>(opt.k)},
                      {"coefficient", static_cast<double>(opt.coefficient)},
                      {"bound", static_cast<double>(opt.bound)}};

    bool ok = true;
    if (o.exact) {
        const long double exact = analysis::epsilon_exact(p, o.workers);
        const bool dominated = exact <= b.bound;
        ok = ok && dominated;
        out["exact"] = {{"epsilon", static_cast<double>(exact)}, {"below_bound", dominated}};
    }
    if (o.mc_trials > 0) {
        const auto mc = analysis::monte_carlo_evidence(p, o.mc_trials, o.seed.value_or(1), o.workers);
        out["monte_carlo"] = {{"trials", o.mc_trials},
                              {"evidence_ok", mc.evidence_ok},
                              {"same_key", mc.same_key},
                              {"same_key_rate", static_cast<double>(mc.same_key) / static_cast<double>(o.mc_trials)}};
    }

    const std::string text = dump(out);
    std::cout << text;
    if (!o.out.empty()) {
        fs::create_directories(o.out);
        write_file(fs::path(o.out) / "analysis.json", text);
    }
    if (!ok) {
        std::cerr << "invariant violated: exact epsilon exceeds bound\n";
        return kExitInvariant;
    }
    return 0;
}

std::string stack_text(const std::vector<Bytes>& stack) {
    if (stack.empty()) return "[]";
    std::string s = "[";
    for (std::size_t i = 0; i < stack.size(); ++i) {
        if (i) s += " ";
        const auto& item = stack[i];
        if (item.empty()) {
            s += "<>";
        } else if (item.size() > 12) {
            s += to_hex(ByteView(item).first(6)) + "..(" + std::to_string(item.size()) + "B)";
        } else {
            s += to_hex(item);
        }
    }
    return s + "]";
}

int cmd_script(const Options& o) {
    ModelParams defaults;
    defaults.secret_bits = o.bsec;
    defaults.address_bits = o.baddr;
    defaults.digest_bits = o.digest_bits;
    const auto pubkey_script = script::parse_script(read_file(o.script_file));
    const auto witness = scenario::parse_witness(read_file(o.witness_file), defaults);

    const auto r = script::execute(witness.script_sig, pubkey_script, {witness.message, witness.params});
    std::cout << "start " << stack_text(r.stack_before) << "\n";
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
        const auto& step = r.trace[i];
        std::cout << (i + 1) << " " << step.op << (step.executed ? "" : " (skipped)") << " "
                  << stack_text(step.stack_after) << "\n";
    }
    if (r.accepted) {
        std::cout << "ACCEPT\n";
        return 0;
    }
    std::cout << "REJECT " << (r.error ? script::to_string(*r.error) : "unknown") << "\n";
    return kExitReject;
}

int cmd_keygen(const Options& o) {
    const ModelParams p = cli_params(o);
    const auto sk = crypto::keygen(o.seed.value_or(1), p);
    const auto pk = crypto::derive_pubkey(sk, p);
    const auto addr = crypto::derive_address(pk, p);
    json out = {{"secret_key", sk.hex()},
                {"address", addr.encoded},
                {"address_hash", addr.hash.hex()},
                {"public_key", pk.hex()}};
    std::cout << dump(out);
    if (!o.out.empty()) {
        // A spendable P2PKH lock and a witness for it over `message`.
        Bytes msg;
        try {
            msg = from_hex(o.message);
        } catch (const std::invalid_argument&) {
            throw scenario::ConfigError("--message must be hex");
        }
        fs::create_directories(o.out);
        write_file(fs::path(o.out) / "p2pkh.script", script::print_script(script::p2pkh_script_template(addr.hash, p)) + "\n");
        auto sig = crypto::sign(sk, msg, p);
        write_file(fs::path(o.out) / "p2pkh_witness.txt",
                   scenario::format_witness(p, msg, script::push_only({sig.data, pk.data})));
    }
    return 0;
}

int cmd_chain_dump(const Options& o) {
    fs::path path = !o.chain_file.empty() ? fs::path(o.chain_file) : fs::path(o.out) / "chain.bin";
    const std::string raw = read_file(path);
    ledger::ChainState chain = ledger::deserialize_chain(as_view(raw));
    std::cout << dump(scenario::state_dump(chain));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Brute-force address collision simulator"};
    app.set_version_flag("--version", std::string(scenario::kVersion));
    app.require_subcommand(1);
    Options o;

    auto* sim = app.add_subcommand("simulate", "Run an end-to-end attack and evidence scenario");
    sim->add_option("--config", o.config, "Scenario config file");
    sim->add_option("--seed", o.seed, "Master seed override");
    sim->add_option("--out", o.out, "Directory for report and artifacts");

    auto* ana = app.add_subcommand("analyze", "Evaluate the evidence-failure bound");
    ana->add_option("--bsec", o.bsec, "Secret-key bits");
    ana->add_option("--baddr", o.baddr, "Address bits");
    ana->add_flag("--exact", o.exact, "Enumerate the key space (bsec <= 20)");
    ana->add_option("--mc-trials", o.mc_trials, "Monte Carlo attack trials");
    ana->add_option("--seed", o.seed, "Monte Carlo seed");
    ana->add_option("--workers", o.workers, "Worker threads");
    ana->add_option("--out", o.out, "Directory for analysis.json");

    auto* scr = app.add_subcommand("script", "Execute a locking script against a witness");
    scr->add_option("script", o.script_file, "Locking script file")->required();
    scr->add_option("witness", o.witness_file, "Witness file")->required();
    scr->add_option("--bsec", o.bsec, "Default secret-key bits");
    scr->add_option("--baddr", o.baddr, "Default address bits");

    auto* key = app.add_subcommand("keygen", "Derive a key and its address");
    key->add_option("--seed", o.seed, "Key seed");
    key->add_option("--bsec", o.bsec, "Secret-key bits");
    key->add_option("--baddr", o.baddr, "Address bits");
    key->add_option("--message", o.message, "Hex message signed into the P2PKH witness");
    key->add_option("--out", o.out, "Directory for p2pkh.script and p2pkh_witness.txt");

    auto* cd = app.add_subcommand("chain-dump", "Print the UTXO and frozen sets of a saved chain");
    cd->add_option("chain", o.chain_file, "Chain file (default OUT/chain.bin)");
    cd->add_option("--out", o.out, "Directory holding chain.bin");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    try {
        if (*sim) return cmd_simulate(o);
        if (*ana) return cmd_analyze(o);
        if (*scr) return cmd_script(o);
        if (*key) return cmd_keygen(o);
        if (*cd) return cmd_chain_dump(o);
    } catch (const scenario::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParamsError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const script::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SerializationError& e) {
        std::cerr << "malformed input: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
